#include "mmnl/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mmnl/densities.hpp"
#include "mmnl/linalg.hpp"

namespace mmnl {

Vector choice_probabilities(const Matrix& x, const Vector& beta) {
  if (!x.allFinite() || !beta.allFinite()) {
    throw std::invalid_argument("choice_probabilities: non-finite input");
  }
  if (x.cols() != beta.size()) {
    throw std::invalid_argument("choice_probabilities: dimension mismatch");
  }
  const Vector u = x * beta;
  const double m = u.maxCoeff();
  Vector p = (u.array() - m).exp();
  p /= p.sum();
  return p;
}

double log_likelihood_agent(const AgentData& agent, const Vector& beta) {
  double ll = 0.0;
  for (const auto& ev : agent.events) {
    const Vector u = ev.x * beta;
    ll += u[ev.chosen] - log_sum_exp(u);
  }
  return ll;
}

double f_beta(const Vector& beta, const AgentData& agent,
              const GlobalVarParams& global) {
  const Vector d = beta - global.mu_zeta;
  const double penalty = 0.5 * global.omega * d.dot(global.upsilon_inv * d);
  return log_likelihood_agent(agent, beta) - penalty;
}

Vector grad_f(const Vector& beta, const AgentData& agent,
              const GlobalVarParams& global) {
  Vector g = -global.omega * (global.upsilon_inv * (beta - global.mu_zeta));
  for (const auto& ev : agent.events) {
    const Vector p = choice_probabilities(ev.x, beta);
    g += ev.x.row(ev.chosen).transpose() - ev.x.transpose() * p;
  }
  return g;
}

GradHess grad_hess_f(const Vector& beta, const AgentData& agent,
                     const GlobalVarParams& global) {
  GradHess out;
  out.grad = -global.omega * (global.upsilon_inv * (beta - global.mu_zeta));
  out.hess = -global.omega * global.upsilon_inv;
  for (const auto& ev : agent.events) {
    const Vector p = choice_probabilities(ev.x, beta);
    out.grad += ev.x.row(ev.chosen).transpose() - ev.x.transpose() * p;
    const Matrix xp = ev.x.transpose() * p;  // K x 1
    out.hess -= ev.x.transpose() * p.asDiagonal() * ev.x - xp * xp.transpose();
  }
  out.hess = 0.5 * (out.hess + out.hess.transpose().eval());
  return out;
}

double delta_expectation(const LocalVarParams& local, const Matrix& x) {
  if (!x.allFinite() || !local.mu.allFinite() || !local.Sigma.allFinite()) {
    throw std::invalid_argument("delta_expectation: non-finite input");
  }
  if (x.cols() != local.mu.size() || local.Sigma.rows() != local.mu.size() ||
      local.Sigma.cols() != local.mu.size()) {
    throw std::invalid_argument("delta_expectation: dimension mismatch");
  }
  const Vector u = x * local.mu;
  const Vector rho = choice_probabilities(x, local.mu);
  const Matrix m = x * local.Sigma * x.transpose();
  const double curvature = rho.dot(m.diagonal()) - rho.dot(m * rho);
  return log_sum_exp(u) + 0.5 * curvature;
}

double log_joint(const ChoiceDataset& dataset, const ModelParams& params,
                 const Hyperpriors& priors) {
  const int K = dataset.K;
  const int H = dataset.H();
  priors.validate(K);
  if (static_cast<int>(params.betas.size()) != H) {
    throw std::invalid_argument("log_joint: betas size must equal H");
  }
  if (params.zeta.size() != K || params.a.size() != K ||
      params.Omega.rows() != K || params.Omega.cols() != K) {
    throw std::invalid_argument("log_joint: dimension mismatch");
  }
  if ((params.a.array() <= 0.0).any()) {
    throw std::invalid_argument("log_joint: a must be positive");
  }
  if (!is_spd(params.Omega)) {
    throw std::invalid_argument("log_joint: Omega must be symmetric positive definite");
  }

  double lp = 0.0;
  for (int k = 0; k < K; ++k) {
    lp += log_inv_gamma(params.a[k], 0.5, 1.0 / (priors.A[k] * priors.A[k]));
  }
  const Matrix iw_scale =
      2.0 * priors.nu * params.a.cwiseInverse().asDiagonal().toDenseMatrix();
  lp += log_inv_wishart(params.Omega, priors.nu + K - 1.0, iw_scale);
  lp += log_mvnormal(params.zeta, priors.mu0, priors.Sigma0);
  for (int h = 0; h < H; ++h) {
    lp += log_mvnormal(params.betas[h], params.zeta, params.Omega);
    lp += log_likelihood_agent(dataset.agents[h], params.betas[h]);
  }
  return lp;
}

}  // namespace mmnl

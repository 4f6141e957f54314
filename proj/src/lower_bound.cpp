#include <cmath>
#include <stdexcept>

#include "mmnl/batch_vb.hpp"
#include "mmnl/linalg.hpp"
#include "mmnl/model.hpp"

namespace mmnl {

namespace {

// Terms of the simplified lower bound shared by every E_q{f} surrogate.
double lower_bound_common(const ChoiceDataset& dataset, const GlobalVarParams& global,
                          const std::vector<LocalVarParams>& locals,
                          const Hyperpriors& priors) {
  const int H = dataset.H();
  const int K = dataset.K;
  const double omega = global.omega;
  const double nu = priors.nu;

  const auto sigma0_llt = spd_cholesky(priors.Sigma0, "lower_bound Sigma0");
  const double log_det_sigma0 =
      2.0 * sigma0_llt.matrixLLT().diagonal().array().log().sum();
  const Vector d0 = global.mu_zeta - priors.mu0;

  double lb = 0.0;
  lb -= 0.5 * omega * H * (global.Sigma_zeta * global.upsilon_inv).trace();
  lb -= 0.5 * omega * spd_log_det(global.Upsilon, "lower_bound Upsilon");
  lb -= 0.5 * d0.dot(sigma0_llt.solve(d0));
  lb -= 0.5 * sigma0_llt.solve(global.Sigma_zeta).trace();
  for (int k = 0; k < K; ++k) {
    const double a_k = priors.A[k];
    lb -= (nu * omega * global.upsilon_inv(k, k) + 1.0 / (a_k * a_k)) *
          (global.b[k] / global.c[k]);
  }
  lb -= 0.5 * log_det_sigma0;
  for (const auto& local : locals) {
    lb += 0.5 * spd_log_det(local.Sigma, "lower_bound Sigma_h");
  }
  lb += 0.5 * spd_log_det(global.Sigma_zeta, "lower_bound Sigma_zeta");
  for (int k = 0; k < K; ++k) lb -= global.b[k] * std::log(global.c[k]);
  lb += 0.5 * K * (H + 1.0 + omega + omega * std::log(2.0));
  lb += 0.5 * K * (nu + K - 1.0) * std::log(nu);
  for (int k = 1; k <= K; ++k) {
    lb += std::lgamma(0.5 * (omega + 1.0 - k)) - std::lgamma(0.5 * (nu + K - k));
    lb += std::lgamma(global.b[k - 1]) + global.b[k - 1] - std::log(priors.A[k - 1]);
  }
  lb -= K * std::lgamma(0.5);
  return lb;
}

double quadratic_penalty(const GlobalVarParams& global, const LocalVarParams& local) {
  const Vector d = local.mu - global.mu_zeta;
  return 0.5 * global.omega *
         (d.dot(global.upsilon_inv * d) + (global.upsilon_inv * local.Sigma).trace());
}

}  // namespace

double lower_bound_laplace(const ChoiceDataset& dataset, const GlobalVarParams& global,
                           const std::vector<LocalVarParams>& locals,
                           const Hyperpriors& priors) {
  if (static_cast<int>(locals.size()) != dataset.H()) {
    throw std::invalid_argument("lower_bound_laplace: locals size mismatch");
  }
  double lb = lower_bound_common(dataset, global, locals, priors);
  for (int h = 0; h < dataset.H(); ++h) {
    lb += f_beta(locals[h].mu, dataset.agents[h], global) - 0.5 * dataset.K;
  }
  return lb;
}

double lower_bound_delta(const ChoiceDataset& dataset, const GlobalVarParams& global,
                         const std::vector<LocalVarParams>& locals,
                         const Hyperpriors& priors) {
  if (static_cast<int>(locals.size()) != dataset.H()) {
    throw std::invalid_argument("lower_bound_delta: locals size mismatch");
  }
  double lb = lower_bound_common(dataset, global, locals, priors);
  for (int h = 0; h < dataset.H(); ++h) {
    const auto& agent = dataset.agents[h];
    const auto& local = locals[h];
    double e_f = -quadratic_penalty(global, local);
    for (const auto& ev : agent.events) {
      e_f += ev.x.row(ev.chosen).dot(local.mu) - delta_expectation(local, ev.x);
    }
    lb += e_f;
  }
  return lb;
}

}  // namespace mmnl

#include "mmnl/local_backends.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mmnl/linalg.hpp"
#include "mmnl/model.hpp"

namespace mmnl {

const char* backend_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kLaplace: return "laplace";
    case BackendKind::kNcvmp: return "ncvmp";
    case BackendKind::kSlr: return "slr";
  }
  return "unknown";
}

BackendKind backend_from_name(const std::string& name) {
  if (name == "laplace") return BackendKind::kLaplace;
  if (name == "ncvmp") return BackendKind::kNcvmp;
  if (name == "slr") return BackendKind::kSlr;
  throw std::invalid_argument("unknown backend: " + name);
}

void SlrConfig::validate() const {
  if (iterations < 2 || iterations % 2 != 0) {
    throw std::invalid_argument("SlrConfig: iterations must be even and >= 2");
  }
  if (!(weight > 0.0) || weight > 1.0) {
    throw std::invalid_argument("SlrConfig: weight must lie in (0, 1]");
  }
}

LocalVarParams laplace_local(const AgentData& agent, const GlobalVarParams& global,
                             const Vector& init, const BfgsOptions& opts) {
  const auto K = init.size();
  Vector x = init;
  double fx = f_beta(x, agent, global);
  Vector g = grad_f(x, agent, global);
  Matrix h_inv = Matrix::Identity(K, K);
  bool scaled = false;

  const auto converged = [&](const Vector& grad, double f) {
    return grad.norm() <= opts.grad_tol * (1.0 + std::abs(f));
  };

  for (int it = 0; it < opts.max_iterations && !converged(g, fx); ++it) {
    Vector d = h_inv * g;  // ascent direction
    double gd = g.dot(d);
    if (!(gd > 0.0) || !d.allFinite()) {
      h_inv = Matrix::Identity(K, K);
      d = g;
      gd = g.squaredNorm();
      scaled = false;
    }
    double t = 1.0;
    Vector x_new;
    double f_new = fx;
    bool accepted = false;
    while (t >= 1e-14) {
      x_new = x + t * d;
      f_new = f_beta(x_new, agent, global);
      if (std::isfinite(f_new) && f_new >= fx + opts.armijo_c * t * gd) {
        accepted = true;
        break;
      }
      t *= opts.backtrack;
    }
    if (!accepted) break;  // at numerical limits; the Newton polish decides

    const Vector g_new = grad_f(x_new, agent, global);
    const Vector s = x_new - x;
    const Vector y = g - g_new;  // gradient change of the negated objective
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv = (sy / y.squaredNorm()) * Matrix::Identity(K, K);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Matrix left = Matrix::Identity(K, K) - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }
    x = x_new;
    fx = f_new;
    g = g_new;
  }

  // Newton polish: the exact Hessian is needed for Sigma_h anyway, and near
  // the optimum it squares the remaining gradient error.
  GradHess gh = grad_hess_f(x, agent, global);
  for (int polish = 0; polish < 8; ++polish) {
    if (gh.grad.norm() <= 1e-11 * (1.0 + std::abs(fx))) break;
    const auto neg_hess_llt = spd_cholesky(-gh.hess, "laplace_local -Hessian");
    Vector step = neg_hess_llt.solve(gh.grad);
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half) {
      const Vector cand = x + t * step;
      const double f_cand = f_beta(cand, agent, global);
      if (std::isfinite(f_cand) && f_cand >= fx - 1e-12 * (1.0 + std::abs(fx))) {
        x = cand;
        fx = f_cand;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
    gh = grad_hess_f(x, agent, global);
  }

  if (!converged(gh.grad, fx)) {
    std::ostringstream os;
    os << "laplace_local: no convergence within " << opts.max_iterations
       << " iterations (gradient norm " << gh.grad.norm() << ", f " << fx << ")";
    throw OptimizerFailure(os.str(), x, gh.grad.norm());
  }

  LocalVarParams out;
  out.mu = x;
  out.Sigma = spd_inverse(-gh.hess, "laplace_local -Hessian");
  out.Sigma = 0.5 * (out.Sigma + out.Sigma.transpose().eval());
  return out;
}

LocalVarParams ncvmp_local_step(const AgentData& agent, const GlobalVarParams& global,
                                const LocalVarParams& current) {
  const auto K = current.mu.size();
  std::vector<Vector> rhos;
  rhos.reserve(agent.events.size());
  Matrix curvature = Matrix::Zero(K, K);
  for (const auto& ev : agent.events) {
    Vector rho = choice_probabilities(ev.x, current.mu);
    const Vector xr = ev.x.transpose() * rho;
    curvature += ev.x.transpose() * rho.asDiagonal() * ev.x - xr * xr.transpose();
    rhos.push_back(std::move(rho));
  }
  Matrix precision = curvature + global.omega * global.upsilon_inv;
  precision = 0.5 * (precision + precision.transpose().eval());
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "ncvmp_local_step: precision update not SPD for agent " << agent.agent_id
       << " (diag min " << precision.diagonal().minCoeff() << ")";
    throw NumericalError(os.str());
  }
  LocalVarParams next;
  next.Sigma = llt.solve(Matrix::Identity(K, K));
  next.Sigma = 0.5 * (next.Sigma + next.Sigma.transpose().eval());

  Vector grad = -global.omega * (global.upsilon_inv * (current.mu - global.mu_zeta));
  for (std::size_t t = 0; t < agent.events.size(); ++t) {
    const auto& ev = agent.events[t];
    const Vector& rho = rhos[t];
    const Matrix m = ev.x * next.Sigma * ev.x.transpose();
    const Vector v = m * rho - 0.5 * m.diagonal();
    const Vector lambda_v = rho.cwiseProduct(v) - rho * rho.dot(v);
    grad += ev.x.row(ev.chosen).transpose() - ev.x.transpose() * rho +
            ev.x.transpose() * lambda_v;
  }
  next.mu = current.mu + next.Sigma * grad;
  if (!next.mu.allFinite() || !next.Sigma.allFinite()) {
    std::ostringstream os;
    os << "ncvmp_local_step: non-finite update for agent " << agent.agent_id;
    throw NumericalError(os.str());
  }
  return next;
}

bool slr_apply_hessian_sample(Matrix& p, const Matrix& hess_sample, double w) {
  Matrix cand = (1.0 - w) * p - w * hess_sample;
  cand = 0.5 * (cand + cand.transpose().eval());
  if (!cand.allFinite()) return false;
  Eigen::LLT<Matrix> llt(cand);
  if (llt.info() != Eigen::Success) return false;
  p = std::move(cand);
  return true;
}

SlrOutcome slr_local(const AgentData& agent, const GlobalVarParams& global,
                     const LocalVarParams& init, const SlrConfig& cfg, RngStream& rng) {
  cfg.validate();
  const auto K = init.mu.size();
  const int n_iter = cfg.iterations;
  const double w = cfg.weight;
  const double avg_w = 2.0 / n_iter;

  Vector m = init.mu;
  Vector mu = init.mu;
  Matrix p = spd_inverse(init.Sigma, "slr_local initial Sigma");
  p = 0.5 * (p + p.transpose().eval());
  Vector g = Vector::Zero(K);
  Matrix p_bar = Matrix::Zero(K, K);
  Vector g_bar = Vector::Zero(K);
  Vector m_bar = Vector::Zero(K);

  Eigen::LLT<Matrix> p_llt = spd_cholesky(p, "slr_local initial precision");
  int rejections = 0;
  for (int n = 1; n <= n_iter; ++n) {
    const Vector z = rng.normal_vector(static_cast<int>(K));
    const Vector draw = mu + p_llt.matrixU().solve(z);
    const GradHess gh = grad_hess_f(draw, agent, global);

    const bool accepted = slr_apply_hessian_sample(p, gh.hess, w);
    if (!accepted) ++rejections;
    g = (1.0 - w) * g + w * gh.grad;
    m = (1.0 - w) * m + w * draw;

    p_llt = spd_cholesky(p, "slr_local precision");
    mu = p_llt.solve(g) + m;

    if (n > n_iter / 2) {
      if (accepted) {
        p_bar -= avg_w * gh.hess;
      } else {
        p_bar += avg_w * p;  // stand-in for the rejected sample
      }
      g_bar += avg_w * gh.grad;
      m_bar += avg_w * draw;
    }
  }

  SlrOutcome out;
  out.hessian_rejections = rejections;
  out.local.Sigma = spd_inverse(p_bar, "slr_local averaged precision");
  out.local.Sigma = 0.5 * (out.local.Sigma + out.local.Sigma.transpose().eval());
  out.local.mu = out.local.Sigma * g_bar + m_bar;
  return out;
}

namespace {

Matrix default_lse_rows(Eigen::Index K) {
  RngStream rows_rng(0x5eedf00dULL);
  Matrix rows(3, K);
  for (Eigen::Index j = 0; j < 3; ++j) {
    for (Eigen::Index k = 0; k < K; ++k) rows(j, k) = rows_rng.normal();
  }
  return rows;
}

double quad_ev(const Matrix& a, const Vector& lin, const Vector& mu, const Matrix& sigma) {
  return 0.5 * mu.dot(a * mu) + 0.5 * (a * sigma).trace() + lin.dot(mu);
}

}  // namespace

SlrIdentityReport slr_identity_check(const Matrix& quad_a, const Vector& lin_a,
                                     const Vector& mu, const Matrix& sigma,
                                     int draws, RngStream& rng,
                                     const Matrix* lse_rows) {
  const auto K = mu.size();
  SlrIdentityReport report;
  report.draws = draws;

  // Closed-form routes for linear and quadratic V: the mu/Sigma gradients of
  // E_q{V} are taken by central finite differences of the closed-form
  // expectation (exact for polynomials of degree <= 2), the other side from
  // the moment formulas.
  const auto exact_errors = [&](const Matrix& a, const Vector& lin, double& mu_err,
                                double& sigma_err) {
    const double step = 1e-4;
    Vector lhs_mu(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      Vector up = mu, dn = mu;
      up[k] += step;
      dn[k] -= step;
      lhs_mu[k] = (quad_ev(a, lin, up, sigma) - quad_ev(a, lin, dn, sigma)) / (2.0 * step);
    }
    const Vector rhs_mu = a * mu + lin;
    mu_err = (lhs_mu - rhs_mu).cwiseAbs().maxCoeff();

    Matrix lhs_sigma(K, K);
    for (Eigen::Index i = 0; i < K; ++i) {
      for (Eigen::Index j = 0; j < K; ++j) {
        Matrix up = sigma, dn = sigma;
        up(i, j) += step;
        dn(i, j) -= step;
        lhs_sigma(i, j) =
            (quad_ev(a, lin, mu, up) - quad_ev(a, lin, mu, dn)) / (2.0 * step);
      }
    }
    const Matrix rhs_sigma = 0.5 * a;
    sigma_err = (lhs_sigma - rhs_sigma).cwiseAbs().maxCoeff();
  };

  exact_errors(Matrix::Zero(K, K), lin_a, report.linear_mu_err, report.linear_sigma_err);
  exact_errors(quad_a, lin_a, report.quad_mu_err, report.quad_sigma_err);

  // Monte Carlo two-sided check for a log-sum-exp V: per-draw paired
  // differences between the score-function route and the derivative route.
  const Matrix rows = lse_rows ? *lse_rows : default_lse_rows(K);
  const auto chol = spd_cholesky(sigma, "slr_identity_check Sigma");
  const Matrix sigma_inv = chol.solve(Matrix::Identity(K, K));

  Vector mu_diff_sum = Vector::Zero(K);
  Vector mu_diff_sq = Vector::Zero(K);
  Matrix sig_diff_sum = Matrix::Zero(K, K);
  Matrix sig_diff_sq = Matrix::Zero(K, K);
  for (int i = 0; i < draws; ++i) {
    const Vector z = rng.normal_vector(static_cast<int>(K));
    const Vector theta = mu + chol.matrixL() * z;
    const Vector score = chol.matrixU().solve(z);  // Sigma^{-1} (theta - mu)
    const Vector u = rows * theta;
    const double v = log_sum_exp(u);
    const Vector rho = choice_probabilities(rows, theta);

    const Vector d_mu = score * v - rows.transpose() * rho;
    mu_diff_sum += d_mu;
    mu_diff_sq += d_mu.cwiseProduct(d_mu);

    const Vector xr = rows.transpose() * rho;
    const Matrix hess_v =
        rows.transpose() * rho.asDiagonal() * rows - xr * xr.transpose();
    const Matrix d_sig =
        0.5 * ((score * score.transpose() - sigma_inv) * v - hess_v);
    sig_diff_sum += d_sig;
    sig_diff_sq += d_sig.cwiseProduct(d_sig);
  }
  const double n = static_cast<double>(draws);
  const auto ratio = [&](double sum, double sumsq) {
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    const double se = std::sqrt(var / n);
    return se > 0.0 ? std::abs(mean) / se : std::abs(mean) > 0.0 ? 1e300 : 0.0;
  };
  for (Eigen::Index k = 0; k < K; ++k) {
    report.mc_mu_max_se_ratio =
        std::max(report.mc_mu_max_se_ratio, ratio(mu_diff_sum[k], mu_diff_sq[k]));
  }
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = 0; j < K; ++j) {
      report.mc_sigma_max_se_ratio = std::max(
          report.mc_sigma_max_se_ratio, ratio(sig_diff_sum(i, j), sig_diff_sq(i, j)));
    }
  }
  return report;
}

}  // namespace mmnl

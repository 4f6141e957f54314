#include "mmnl/svi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mmnl/conjugate_updates.hpp"
#include "mmnl/errors.hpp"
#include "mmnl/linalg.hpp"
#include "mmnl/rng.hpp"

#include "fit_internal.hpp"

namespace mmnl {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kSchedulePivot = 25;
}  // namespace

double linear_schedule(int batch_size, int H, double initial) {
  if (batch_size >= H) return 1.0;
  if (batch_size <= kSchedulePivot || H <= kSchedulePivot) return initial;
  return initial + (1.0 - initial) * (batch_size - kSchedulePivot) /
                       static_cast<double>(H - kSchedulePivot);
}

double progress_ratio(const std::vector<double>& series, int window) {
  const int n = static_cast<int>(series.size());
  if (n < 2) throw std::invalid_argument("progress_ratio: need at least 2 points");
  const int steps = std::min(window, n - 1);
  const int first = n - 1 - steps;
  double path = 0.0;
  for (int r = first; r < n - 1; ++r) path += std::abs(series[r] - series[r + 1]);
  if (path == 0.0) return 1.0;
  return std::abs(series[first] - series[n - 1]) / path;
}

void SviConfig::validate(int H) const {
  const int cap = batch_cap <= 0 ? H : std::min(batch_cap, H);
  if (initial_batch < 1) {
    throw std::invalid_argument("SviConfig: initial_batch must be >= 1");
  }
  if (std::min(initial_batch, H) > cap) {
    throw std::invalid_argument("SviConfig: initial_batch must not exceed batch_cap");
  }
  if (!(initial_alpha > 0.0) || initial_alpha > 1.0) {
    throw std::invalid_argument("SviConfig: initial_alpha must lie in (0, 1]");
  }
  if (!(initial_phi > 0.0) || initial_phi > 1.0) {
    throw std::invalid_argument("SviConfig: initial_phi must lie in (0, 1]");
  }
  if (!(kappa > 1.0)) throw std::invalid_argument("SviConfig: kappa must exceed 1");
  if (history_window < 2) {
    throw std::invalid_argument("SviConfig: history_window must be >= 2");
  }
  if (ratio_warmup < 1) {
    throw std::invalid_argument("SviConfig: ratio_warmup must be >= 1");
  }
  if (!(ncvmp_inner_tol > 0.0) || ncvmp_inner_max < 1) {
    throw std::invalid_argument("SviConfig: bad ncvmp inner settings");
  }
}

RatioHistory::RatioHistory(int window, int K)
    : window_(window), upsilon_series_(K), mu_series_(K) {}

void RatioHistory::reset(const GlobalVarParams& global) {
  l_ = 0;
  for (auto& s : upsilon_series_) s.clear();
  for (auto& s : mu_series_) s.clear();
  const auto K = global.mu_zeta.size();
  for (Eigen::Index k = 0; k < K; ++k) {
    upsilon_series_[k].push_back(global.Upsilon(k, k));
    mu_series_[k].push_back(global.mu_zeta[k]);
  }
}

void RatioHistory::push(const GlobalVarParams& global) {
  ++l_;
  const auto K = global.mu_zeta.size();
  for (Eigen::Index k = 0; k < K; ++k) {
    upsilon_series_[k].push_back(global.Upsilon(k, k));
    mu_series_[k].push_back(global.mu_zeta[k]);
    if (static_cast<int>(upsilon_series_[k].size()) > window_ + 1) {
      upsilon_series_[k].pop_front();
      mu_series_[k].pop_front();
    }
  }
}

std::vector<double> RatioHistory::ratios() const {
  std::vector<double> out;
  out.reserve(upsilon_series_.size() + mu_series_.size());
  const auto ratio_of = [&](const std::deque<double>& series) {
    const std::vector<double> values(series.begin(), series.end());
    return progress_ratio(values, window_);
  };
  for (const auto& s : upsilon_series_) out.push_back(ratio_of(s));
  for (const auto& s : mu_series_) out.push_back(ratio_of(s));
  return out;
}

BatchDecision batch_controller_step(const RatioHistory& history,
                                    const GlobalVarParams& global,
                                    const SviConfig& cfg, int batch_size, int H) {
  (void)global;
  BatchDecision decision;
  decision.new_batch = batch_size;
  decision.min_ratio = kNaN;
  if (history.iterations_since_change() <= cfg.ratio_warmup) return decision;

  const auto ratios = history.ratios();
  decision.min_ratio = *std::min_element(ratios.begin(), ratios.end());
  const auto schedule = cfg.schedule_fn ? cfg.schedule_fn : linear_schedule;
  const double phi_threshold = schedule(batch_size, H, cfg.initial_phi);
  if (decision.min_ratio < phi_threshold) {
    const int cap = cfg.batch_cap <= 0 ? H : std::min(cfg.batch_cap, H);
    const int grown = static_cast<int>(std::floor(cfg.kappa * batch_size));
    decision.new_batch = std::min(std::max(grown, batch_size + 1), cap);
    decision.grow = decision.new_batch != batch_size;
  }
  return decision;
}

Vector zeta_stat(const std::vector<LocalVarParams>& locals,
                 const std::vector<int>& batch, const GlobalVarParams& global,
                 const Hyperpriors& priors, int H, const Matrix& sigma_zeta) {
  const double scale = static_cast<double>(H) / static_cast<double>(batch.size());
  const Matrix sigma0_inv = spd_inverse(priors.Sigma0, "zeta_stat Sigma0");
  const Vector mu_sum = scale * sum_local_means(locals, batch);
  return sigma_zeta * (sigma0_inv * priors.mu0 + global.omega * (global.upsilon_inv * mu_sum));
}

Matrix upsilon_stat(const std::vector<LocalVarParams>& locals,
                    const std::vector<int>& batch, const GlobalVarParams& global,
                    const Hyperpriors& priors, int H) {
  const double scale = static_cast<double>(H) / static_cast<double>(batch.size());
  Matrix upsilon =
      (2.0 * priors.nu * (global.b.array() / global.c.array())).matrix().asDiagonal();
  upsilon += scale * sum_local_scatter(locals, batch, global.mu_zeta);
  upsilon += H * global.Sigma_zeta;
  return upsilon;
}

GlobalVarParams stochastic_global_update(GlobalVarParams global,
                                         const std::vector<LocalVarParams>& locals,
                                         const std::vector<int>& batch,
                                         const Hyperpriors& priors, double alpha, int H) {
  if (batch.empty()) {
    throw std::invalid_argument("stochastic_global_update: empty minibatch");
  }
  if (!(alpha >= 0.0) || alpha > 1.0) {
    throw std::invalid_argument("stochastic_global_update: alpha must lie in [0, 1]");
  }
  const Matrix sigma0_inv = spd_inverse(priors.Sigma0, "stochastic_global_update Sigma0");
  const Matrix precision = sigma0_inv + H * global.omega * global.upsilon_inv;
  global.Sigma_zeta = spd_inverse(precision, "stochastic_global_update precision");

  const Vector zeta_hat = zeta_stat(locals, batch, global, priors, H, global.Sigma_zeta);
  global.mu_zeta = (1.0 - alpha) * global.mu_zeta + alpha * zeta_hat;

  const Matrix ups_hat = upsilon_stat(locals, batch, global, priors, H);
  global.set_upsilon((1.0 - alpha) * global.Upsilon + alpha * ups_hat);
  global.c = update_a(global, priors);
  return global;
}

FitResult fit_svi(const ChoiceDataset& dataset, const Hyperpriors& priors,
                  const BackendConfig& backend, const SviConfig& cfg,
                  const StopConfig& stop, std::uint64_t seed, int threads) {
  dataset.validate();
  priors.validate(dataset.K);
  stop.validate();
  if (backend.kind == BackendKind::kSlr) backend.slr.validate();
  const int H = dataset.H();
  const int K = dataset.K;
  cfg.validate(H);

  const auto t0 = detail::Clock::now();
  FitResult res;
  res.backend = backend.kind;
  res.seed = seed;
  res.global = GlobalVarParams::init(H, K, priors);
  res.locals.assign(H, LocalVarParams{Vector::Zero(K), 0.01 * Matrix::Identity(K, K)});

  const int cap = cfg.batch_cap <= 0 ? H : std::min(cfg.batch_cap, H);
  int batch_size = std::min(cfg.initial_batch, H);
  const auto schedule = cfg.schedule_fn ? cfg.schedule_fn : linear_schedule;
  const detail::NcvmpInner inner{cfg.ncvmp_inner_tol, cfg.ncvmp_inner_max};

  int counter = 0;
  bool ran_stochastic = false;
  bool converged = false;

  if (batch_size < H) {
    RatioHistory history(cfg.history_window, K);
    history.reset(res.global);
    // Trailing statistic used only when the batch phase is unreachable.
    detail::ThetaSmoother smoother(stop.smoothing_window);
    Vector prev_smoothed = smoother.push(theta_vector(res.global));
    double prev_lb = kNaN;

    while (batch_size < cap || (batch_size == cap && cap < H)) {
      if (counter >= stop.max_sweeps) break;
      ++counter;
      ran_stochastic = true;

      RngStream batch_rng = RngStream::derive(seed, RngDomain::kMinibatch,
                                              static_cast<std::uint64_t>(counter));
      const std::vector<int> batch = sample_without_replacement(H, batch_size, batch_rng);

      const double alpha = cfg.decaying_stepsize
                               ? cfg.rm_d / std::pow(counter + cfg.rm_big_d, cfg.rm_gamma)
                               : schedule(batch_size, H, cfg.initial_alpha);
      try {
        detail::optimize_locals(dataset, batch, res.global, res.locals, backend, inner,
                                seed, counter, threads, res.diagnostics);
      } catch (const NumericalError& err) {
        if (backend.kind == BackendKind::kNcvmp) {
          throw DivergenceError(std::string(err.what()) +
                                "; try a different initialization or switch backends "
                                "(laplace and slr are more robust here)");
        }
        throw;
      }
      res.global = stochastic_global_update(std::move(res.global), res.locals, batch,
                                            priors, alpha, H);
      history.push(res.global);

      BatchDecision decision{false, batch_size, kNaN};
      if (!cfg.decaying_stepsize) {
        decision = batch_controller_step(history, res.global, cfg, batch_size, H);
      }

      const Vector theta = theta_vector(res.global);
      const Vector smoothed = smoother.push(theta);
      const double trailing_xi = stopping_statistic(prev_smoothed, smoothed);
      prev_smoothed = smoothed;

      TraceRecord rec;
      rec.iteration = counter;
      rec.batch_size = batch_size;
      rec.alpha = alpha;
      rec.xi = cap < H || cfg.decaying_stepsize ? trailing_xi : kNaN;
      rec.min_ratio = decision.min_ratio;
      rec.lower_bound = kNaN;
      rec.wall_time_s = detail::seconds_since(t0);
      rec.theta = theta;
      res.trace.push_back(std::move(rec));

      if (backend.kind == BackendKind::kNcvmp) {
        detail::check_ncvmp_divergence(trailing_xi, res.global, kNaN, prev_lb);
      }

      if ((cap < H || cfg.decaying_stepsize) &&
          counter > cfg.ratio_warmup && trailing_xi < stop.xi_threshold) {
        converged = true;
        break;
      }
      if (decision.grow) {
        batch_size = decision.new_batch;
        history.reset(res.global);
        if (batch_size >= H) break;
      }
    }
  }

  if (!converged && batch_size >= H && counter < stop.max_sweeps) {
    converged = detail::batch_sweep_loop(dataset, priors, backend, stop, seed, threads,
                                         /*ncvmp_inner_on_first_sweep=*/ran_stochastic,
                                         inner, &counter, t0, res);
  }

  res.converged = converged;
  res.diagnostics.jitter_events = res.global.jitter_events;
  res.total_seconds = detail::seconds_since(t0);
  return res;
}

}  // namespace mmnl

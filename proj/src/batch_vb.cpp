#include "mmnl/batch_vb.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mmnl/conjugate_updates.hpp"
#include "mmnl/errors.hpp"
#include "mmnl/parallel.hpp"

#include "fit_internal.hpp"

namespace mmnl {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDivergenceSentinel = 1e6;
}  // namespace

void StopConfig::validate() const {
  if (!(xi_threshold > 0.0)) {
    throw std::invalid_argument("StopConfig: xi_threshold must be positive");
  }
  if (smoothing_window < 1) {
    throw std::invalid_argument("StopConfig: smoothing_window must be >= 1");
  }
  if (max_sweeps < 1) {
    throw std::invalid_argument("StopConfig: max_sweeps must be >= 1");
  }
}

Vector theta_vector(const GlobalVarParams& global) {
  const auto K = global.mu_zeta.size();
  Vector theta(3 * K);
  theta.segment(0, K) = global.mu_zeta;
  theta.segment(K, K) = global.Upsilon.diagonal();
  theta.segment(2 * K, K) = global.c;
  return theta;
}

double stopping_statistic(const Vector& prev, const Vector& next) {
  if (prev.size() != next.size()) {
    throw std::invalid_argument("stopping_statistic: size mismatch");
  }
  double xi = 0.0;
  for (Eigen::Index i = 0; i < prev.size(); ++i) {
    const double change = std::abs(next[i] - prev[i]);
    const double denom = std::abs(prev[i]);
    xi = std::max(xi, denom < 1e-12 ? change : change / denom);
  }
  return xi;
}

namespace detail {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void local_pass(const ChoiceDataset& dataset, const std::vector<int>& idx,
                const GlobalVarParams& global, std::vector<LocalVarParams>& locals,
                const BackendConfig& backend, std::uint64_t seed, int update_counter,
                int threads, FitDiagnostics& diag) {
  std::vector<int> rejections(backend.kind == BackendKind::kSlr ? idx.size() : 0, 0);
  parallel_for(idx.size(), threads, [&](std::size_t i) {
    const int h = idx[i];
    const auto& agent = dataset.agents[h];
    switch (backend.kind) {
      case BackendKind::kLaplace:
        locals[h] = laplace_local(agent, global, locals[h].mu);
        break;
      case BackendKind::kNcvmp:
        locals[h] = ncvmp_local_step(agent, global, locals[h]);
        break;
      case BackendKind::kSlr: {
        RngStream rng = RngStream::derive(
            seed, RngDomain::kLocalBackend,
            static_cast<std::uint64_t>(agent.agent_id),
            static_cast<std::uint64_t>(update_counter));
        auto outcome = slr_local(agent, global, locals[h], backend.slr, rng);
        locals[h] = std::move(outcome.local);
        rejections[i] = outcome.hessian_rejections;
        break;
      }
    }
  });
  for (const int r : rejections) diag.slr_rejections += r;
}

void optimize_locals(const ChoiceDataset& dataset, const std::vector<int>& idx,
                     const GlobalVarParams& global, std::vector<LocalVarParams>& locals,
                     const BackendConfig& backend, const NcvmpInner& inner,
                     std::uint64_t seed, int update_counter, int threads,
                     FitDiagnostics& diag) {
  if (backend.kind != BackendKind::kNcvmp) {
    local_pass(dataset, idx, global, locals, backend, seed, update_counter, threads, diag);
    return;
  }
  Vector prev_mu(idx.size() * dataset.K);
  for (int iter = 0; iter < inner.max_iterations; ++iter) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      prev_mu.segment(i * dataset.K, dataset.K) = locals[idx[i]].mu;
    }
    local_pass(dataset, idx, global, locals, backend, seed, update_counter, threads, diag);
    Vector next_mu(idx.size() * dataset.K);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      next_mu.segment(i * dataset.K, dataset.K) = locals[idx[i]].mu;
    }
    const double denom = next_mu.norm();
    if (denom > 0.0 && (next_mu - prev_mu).norm() / denom < inner.rel_tol) break;
  }
}

Vector ThetaSmoother::push(const Vector& theta) {
  values_.push_back(theta);
  if (static_cast<int>(values_.size()) > window_) values_.pop_front();
  Vector avg = Vector::Zero(theta.size());
  for (const auto& v : values_) avg += v;
  return avg / static_cast<double>(values_.size());
}

void check_ncvmp_divergence(double xi, const GlobalVarParams& global,
                            double lower_bound, double prev_lower_bound) {
  const double mu_norm = global.mu_zeta.norm();
  const bool lb_collapse = std::isfinite(prev_lower_bound) &&
                           (!std::isfinite(lower_bound) ||
                            lower_bound < prev_lower_bound - kDivergenceSentinel);
  if (!std::isfinite(xi) || xi > kDivergenceSentinel ||
      !std::isfinite(mu_norm) || mu_norm > kDivergenceSentinel || lb_collapse) {
    std::ostringstream os;
    os << "ncvmp diverged (xi=" << xi << ", |mu_zeta|=" << mu_norm
       << ", lower bound " << prev_lower_bound << " -> " << lower_bound
       << "); try a different initialization or switch backends "
          "(laplace and slr are more robust here)";
    throw DivergenceError(os.str());
  }
}

bool batch_sweep_loop(const ChoiceDataset& dataset, const Hyperpriors& priors,
                      const BackendConfig& backend, const StopConfig& stop,
                      std::uint64_t seed, int threads, bool ncvmp_inner_on_first_sweep,
                      const NcvmpInner& inner, int* update_counter,
                      Clock::time_point t0, FitResult& res) {
  const int H = dataset.H();
  std::vector<int> all(H);
  for (int h = 0; h < H; ++h) all[h] = h;

  const int window = backend.kind == BackendKind::kSlr ? stop.smoothing_window : 1;
  ThetaSmoother smoother(window);
  Vector prev_smoothed = smoother.push(theta_vector(res.global));
  double prev_lb = kNaN;
  bool first_sweep = true;

  while (*update_counter < stop.max_sweeps) {
    ++*update_counter;
    try {
      if (first_sweep && ncvmp_inner_on_first_sweep) {
        optimize_locals(dataset, all, res.global, res.locals, backend, inner, seed,
                        *update_counter, threads, res.diagnostics);
      } else {
        local_pass(dataset, all, res.global, res.locals, backend, seed,
                   *update_counter, threads, res.diagnostics);
      }
    } catch (const NumericalError& err) {
      if (backend.kind == BackendKind::kNcvmp) {
        throw DivergenceError(std::string(err.what()) +
                              "; try a different initialization or switch backends "
                              "(laplace and slr are more robust here)");
      }
      throw;
    }
    first_sweep = false;

    auto zeta = update_zeta(res.locals, res.global, priors);
    res.global.mu_zeta = std::move(zeta.mu_zeta);
    res.global.Sigma_zeta = std::move(zeta.Sigma_zeta);
    res.global.set_upsilon(update_omega_scale(res.locals, res.global, priors));
    res.global.c = update_a(res.global, priors);

    const Vector theta = theta_vector(res.global);
    const Vector smoothed = smoother.push(theta);
    const double xi = stopping_statistic(prev_smoothed, smoothed);
    prev_smoothed = smoothed;

    double lb = kNaN;
    if (backend.kind == BackendKind::kLaplace) {
      lb = lower_bound_laplace(dataset, res.global, res.locals, priors);
    } else if (backend.kind == BackendKind::kNcvmp) {
      lb = lower_bound_delta(dataset, res.global, res.locals, priors);
    }

    TraceRecord rec;
    rec.iteration = *update_counter;
    rec.batch_size = H;
    rec.alpha = 1.0;
    rec.xi = xi;
    rec.min_ratio = kNaN;
    rec.lower_bound = lb;
    rec.wall_time_s = seconds_since(t0);
    rec.theta = theta;
    res.trace.push_back(std::move(rec));

    if (backend.kind == BackendKind::kNcvmp) {
      check_ncvmp_divergence(xi, res.global, lb, prev_lb);
    }
    prev_lb = lb;

    if (xi < stop.xi_threshold) return true;
  }
  return false;
}

}  // namespace detail

FitResult fit_batch(const ChoiceDataset& dataset, const Hyperpriors& priors,
                    const BackendConfig& backend, const StopConfig& stop,
                    std::uint64_t seed, int threads) {
  dataset.validate();
  priors.validate(dataset.K);
  stop.validate();
  if (backend.kind == BackendKind::kSlr) backend.slr.validate();

  const auto t0 = detail::Clock::now();
  const int H = dataset.H();
  const int K = dataset.K;

  FitResult res;
  res.backend = backend.kind;
  res.seed = seed;
  res.global = GlobalVarParams::init(H, K, priors);
  res.locals.assign(H, LocalVarParams{Vector::Zero(K), 0.01 * Matrix::Identity(K, K)});

  int counter = 0;
  res.converged = detail::batch_sweep_loop(dataset, priors, backend, stop, seed, threads,
                                           /*ncvmp_inner_on_first_sweep=*/false,
                                           detail::NcvmpInner{}, &counter, t0, res);
  res.diagnostics.jitter_events = res.global.jitter_events;
  res.total_seconds = detail::seconds_since(t0);
  return res;
}

}  // namespace mmnl

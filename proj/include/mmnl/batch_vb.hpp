#ifndef MMNL_BATCH_VB_HPP
#define MMNL_BATCH_VB_HPP

#include <cstdint>
#include <vector>

#include "mmnl/local_backends.hpp"
#include "mmnl/types.hpp"

namespace mmnl {

struct StopConfig {
  // Max relative change of [mu_zeta, diag(Upsilon), c] below which the fit
  // stops.
  double xi_threshold = 0.005;
  // Trailing average length applied to the statistic; only used for the SLR
  // backend.
  int smoothing_window = 5;
  int max_sweeps = 500;
  void validate() const;
};

struct TraceRecord {
  int iteration = 0;
  int batch_size = 0;
  double alpha = 1.0;
  double xi = 0.0;         // NaN while no stopping statistic applies
  double min_ratio = 0.0;  // NaN outside the stochastic phase
  double lower_bound = 0.0;  // NaN when not available for the backend/phase
  double wall_time_s = 0.0;  // elapsed since the fit started
  Vector theta;              // [mu_zeta, diag(Upsilon), c] after the update
};

struct FitDiagnostics {
  int jitter_events = 0;
  int slr_rejections = 0;
};

struct FitResult {
  GlobalVarParams global;
  std::vector<LocalVarParams> locals;
  std::vector<TraceRecord> trace;
  FitDiagnostics diagnostics;
  bool converged = false;
  BackendKind backend = BackendKind::kLaplace;
  std::uint64_t seed = 0;
  double total_seconds = 0.0;
};

// Concatenated stopping parameters [mu_zeta, diag(Upsilon), c].
Vector theta_vector(const GlobalVarParams& global);

// max_i |next_i - prev_i| / |prev_i|; components with |prev_i| < 1e-12 use
// the absolute change.
double stopping_statistic(const Vector& prev, const Vector& next);

// Simplified evidence lower bound with E_q{f(beta_h)} replaced by the
// quadratic-expansion surrogate f(mu_h) - K/2.
double lower_bound_laplace(const ChoiceDataset& dataset, const GlobalVarParams& global,
                           const std::vector<LocalVarParams>& locals,
                           const Hyperpriors& priors);

// Same bound with E_q{f(beta_h)} under the second-order moment
// approximation of the log-sum-exp terms.
double lower_bound_delta(const ChoiceDataset& dataset, const GlobalVarParams& global,
                         const std::vector<LocalVarParams>& locals,
                         const Hyperpriors& priors);

// Full coordinate-ascent driver: per sweep, all local updates, then the
// zeta / Upsilon / c updates in that order, until the stopping statistic
// falls below the threshold or max_sweeps is hit (converged=false then).
FitResult fit_batch(const ChoiceDataset& dataset, const Hyperpriors& priors,
                    const BackendConfig& backend, const StopConfig& stop,
                    std::uint64_t seed, int threads = 0);

}  // namespace mmnl

#endif  // MMNL_BATCH_VB_HPP

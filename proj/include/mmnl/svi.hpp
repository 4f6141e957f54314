#ifndef MMNL_SVI_HPP
#define MMNL_SVI_HPP

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "mmnl/batch_vb.hpp"
#include "mmnl/types.hpp"

namespace mmnl {

// Linear stepsize/threshold schedule: `initial` at a batch size of 25
// (and below), rising to 1 at the full dataset.
double linear_schedule(int batch_size, int H, double initial);

// Net displacement over the window divided by total path length. `series`
// holds consecutive iterate values; the last min(M, n-1) steps are used.
// Returns 1 when the path length is 0 (no movement counts as monotone).
double progress_ratio(const std::vector<double>& series, int window);

struct SviConfig {
  int initial_batch = 25;
  double initial_alpha = 0.4;
  double initial_phi = 0.4;
  double kappa = 2.0;     // batch growth factor, > 1
  int history_window = 20;  // M
  int ratio_warmup = 5;     // ratios are computed once l exceeds this
  int batch_cap = 0;        // 0 -> H; caps growth below H for huge data
  double ncvmp_inner_tol = 0.1;
  int ncvmp_inner_max = 3;

  // Opt-in classic Robbins-Monro baseline: keeps the batch size fixed and
  // decays the stepsize as d / (l + D)^gamma instead of growing batches.
  bool decaying_stepsize = false;
  double rm_d = 1.0;
  double rm_big_d = 10.0;
  double rm_gamma = 0.75;

  // Hook for alternative stepsize/threshold shapes; linear by default.
  std::function<double(int, int, double)> schedule_fn;

  void validate(int H) const;
};

// Ring buffers of the monitored iterates (mu_zeta and diag Upsilon) since the
// last batch-size change; l resets to 0 whenever the batch size changes.
class RatioHistory {
 public:
  RatioHistory(int window, int K);
  void reset(const GlobalVarParams& global);
  void push(const GlobalVarParams& global);
  int iterations_since_change() const { return l_; }
  // The 2K progress ratios (K over diag Upsilon, then K over mu_zeta).
  std::vector<double> ratios() const;

 private:
  int window_;
  int l_ = 0;
  std::vector<std::deque<double>> upsilon_series_;
  std::vector<std::deque<double>> mu_series_;
};

struct BatchDecision {
  bool grow = false;
  int new_batch = 0;
  double min_ratio = 0.0;  // NaN while within the warmup
};

// Grow when the minimum of the 2K ratios falls below the threshold schedule
// at the current batch size; always keep during the warmup.
BatchDecision batch_controller_step(const RatioHistory& history,
                                    const GlobalVarParams& global,
                                    const SviConfig& cfg, int batch_size, int H);

// Algorithm-2 steps 4..6: Sigma_zeta recomputed, mu_zeta and Upsilon moved a
// step alpha toward their minibatch-scaled estimates, c updated
// deterministically. With alpha = 1 and the full pool this reproduces the
// batch coordinate updates bit for bit.
GlobalVarParams stochastic_global_update(GlobalVarParams global,
                                         const std::vector<LocalVarParams>& locals,
                                         const std::vector<int>& batch,
                                         const Hyperpriors& priors, double alpha, int H);

// Minibatch-scaled estimate of the Upsilon update bracket at the globals'
// current mu_zeta / Sigma_zeta; exposed for unbiasedness checks.
Matrix upsilon_stat(const std::vector<LocalVarParams>& locals,
                    const std::vector<int>& batch, const GlobalVarParams& global,
                    const Hyperpriors& priors, int H);

// Minibatch-scaled estimate of the mu_zeta update target.
Vector zeta_stat(const std::vector<LocalVarParams>& locals,
                 const std::vector<int>& batch, const GlobalVarParams& global,
                 const Hyperpriors& priors, int H, const Matrix& sigma_zeta);

// Stochastic variational inference with adaptive minibatch sizes: grows the
// minibatch whenever the progress ratios flag oscillation, switches to batch
// sweeps once the whole pool is used, and stops by the batch stopping rule.
// With batch_cap < H the batch phase is disabled and the run stops on a
// trailing-average statistic over the stochastic iterates.
FitResult fit_svi(const ChoiceDataset& dataset, const Hyperpriors& priors,
                  const BackendConfig& backend, const SviConfig& cfg,
                  const StopConfig& stop, std::uint64_t seed, int threads = 0);

}  // namespace mmnl

#endif  // MMNL_SVI_HPP

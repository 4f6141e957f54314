#ifndef MMNL_FIT_INTERNAL_HPP
#define MMNL_FIT_INTERNAL_HPP

#include <chrono>
#include <cstdint>
#include <deque>
#include <vector>

#include "mmnl/batch_vb.hpp"
#include "mmnl/types.hpp"

namespace mmnl::detail {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0);

struct NcvmpInner {
  double rel_tol = 0.1;
  int max_iterations = 3;
};

// One update of every listed agent's local factor: Laplace re-optimizes from
// the stored mu, NCVMP takes a single fixed-point step, SLR runs its N
// weighted iterations on the stream (seed, agent_id, update_counter).
void local_pass(const ChoiceDataset& dataset, const std::vector<int>& idx,
                const GlobalVarParams& global, std::vector<LocalVarParams>& locals,
                const BackendConfig& backend, std::uint64_t seed, int update_counter,
                int threads, FitDiagnostics& diag);

// Local optimization as required by the stochastic driver: one pass for
// Laplace and SLR; repeated passes for NCVMP until the concatenated mu change
// over the listed agents is small or inner.max_iterations is hit.
void optimize_locals(const ChoiceDataset& dataset, const std::vector<int>& idx,
                     const GlobalVarParams& global, std::vector<LocalVarParams>& locals,
                     const BackendConfig& backend, const NcvmpInner& inner,
                     std::uint64_t seed, int update_counter, int threads,
                     FitDiagnostics& diag);

// Trailing-average smoother for the stopping parameters.
class ThetaSmoother {
 public:
  explicit ThetaSmoother(int window) : window_(window < 1 ? 1 : window) {}
  // Pushes a raw value and returns the average over the last `window` values.
  Vector push(const Vector& theta);

 private:
  int window_;
  std::deque<Vector> values_;
};

// Raises DivergenceError when the NCVMP iterates trip a sentinel
// (non-finite or huge statistic / mu_zeta, or a lower-bound collapse).
void check_ncvmp_divergence(double xi, const GlobalVarParams& global,
                            double lower_bound, double prev_lower_bound);

// Algorithm-1 cycles over the full dataset appended onto res.trace;
// *update_counter continues across calls so local RNG streams stay aligned
// with the overall iteration count. Returns true when the stopping rule
// fired within stop.max_sweeps total iterations.
bool batch_sweep_loop(const ChoiceDataset& dataset, const Hyperpriors& priors,
                      const BackendConfig& backend, const StopConfig& stop,
                      std::uint64_t seed, int threads, bool ncvmp_inner_on_first_sweep,
                      const NcvmpInner& inner, int* update_counter,
                      Clock::time_point t0, FitResult& res);

}  // namespace mmnl::detail

#endif  // MMNL_FIT_INTERNAL_HPP

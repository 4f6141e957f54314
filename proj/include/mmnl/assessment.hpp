#ifndef MMNL_ASSESSMENT_HPP
#define MMNL_ASSESSMENT_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mmnl/mcmc.hpp"
#include "mmnl/types.hpp"

namespace mmnl {

struct PredictiveQuery {
  Matrix x;  // J x K attribute matrix
  std::string label;
};

// Known simulating parameters; the predictive distribution integrates over
// beta ~ N(zeta, Omega) only.
struct TrueParams {
  Vector zeta;
  Matrix Omega;
};

// Fitted variational posterior; (zeta, Omega) are drawn from q(zeta) q(Omega).
struct VariationalPosterior {
  GlobalVarParams global;
};

// Retained MCMC draws of (zeta, Omega).
struct McmcPosterior {
  PosteriorDraws draws;
};

using PosteriorSource = std::variant<TrueParams, VariationalPosterior, McmcPosterior>;

// Reference protocol draw counts.
inline constexpr int kTruePcdDraws = 1000000;
inline constexpr int kVbOuterDraws = 500;
inline constexpr int kMcmcOuterDraws = 10000;
inline constexpr int kInnerDraws = 10000;

// Monte Carlo average of the softmax choice probabilities over
// beta ~ N(zeta, Omega); `draws` defaults to the reference protocol's 1e6.
Vector true_pcd(const Matrix& x_new, const Vector& zeta, const Matrix& omega,
                int draws, RngStream& rng);

struct PcdDiagnostics {
  int omega_resamples = 0;
};

// Nested Monte Carlo point estimate of the predictive choice distribution:
// `outer` draws of (zeta, Omega) from the source, `inner` iid draws of beta
// within each. Inner draws are shared across alternatives within one outer
// draw. Non-SPD Omega draws are resampled and counted.
Vector estimated_pcd(const Matrix& x_new, const PosteriorSource& source, int outer,
                     int inner, RngStream& rng, PcdDiagnostics* diag = nullptr);

// Half the L1 distance between two choice-probability vectors; inputs must
// sum to 1 within 1e-8.
double tv_distance(const Vector& p, const Vector& q);

// Sum over held-out events of log p_hat(chosen | x); p_hat from
// estimated_pcd with a per-event RNG substream derived from `seed`.
double predictive_loglik(const PosteriorSource& source,
                         const std::vector<AgentData>& test_agents, int outer,
                         int inner, std::uint64_t seed, int threads = 0);

// Agent-level k-fold partition, folds as equal as possible, deterministic
// given the seed. Returns agent indices per fold.
std::vector<std::vector<int>> kfold_split(const ChoiceDataset& dataset, int k,
                                          std::uint64_t seed);

// Six-number summary used by the reporting surfaces (quartiles by linear
// interpolation).
struct TvSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  int count = 0;
};

TvSummary summarize_tv(std::vector<double> values);

}  // namespace mmnl

#endif  // MMNL_ASSESSMENT_HPP

#ifndef MMNL_DATA_IO_HPP
#define MMNL_DATA_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mmnl/batch_vb.hpp"
#include "mmnl/mcmc.hpp"
#include "mmnl/types.hpp"

namespace mmnl {

struct SimSpec {
  int H = 0;
  int J = 0;
  int K = 0;
  int T_min = 0;  // events per agent; uniform on [T_min, T_max] when they differ
  int T_max = 0;
  Vector zeta_true;
  Matrix Omega_true;  // SPD, or exactly zero for the degenerate limit
  double covariate_sd = 0.5;
  std::uint64_t seed = 0;
  void validate() const;
};

struct TruthRecord {
  Vector zeta;
  Matrix Omega;
  std::vector<Vector> betas;
  std::vector<std::int64_t> agent_ids;
  std::uint64_t seed = 0;
};

struct SimulatedData {
  ChoiceDataset dataset;
  TruthRecord truth;
};

// beta_h ~ N(zeta, Omega), covariate entries iid N(0, covariate_sd^2),
// choices sampled from the softmax probabilities. Deterministic given the
// seed; per-agent RNG substreams.
SimulatedData simulate_dataset(const SimSpec& spec);

// Long-format CSV: header `agent_id,event_id,alt_id,chosen,x1..xK`, one row
// per (agent, event, alternative); exactly one chosen=1 per event and
// alternatives enumerating 0..J-1. Lines starting with '#' are comments.
void save_dataset(const ChoiceDataset& dataset, const std::string& path,
                  const std::string& comment = "");
ChoiceDataset load_dataset(const std::string& path);

void save_truth(const TruthRecord& truth, const std::string& path,
                const std::string& comment = "");
TruthRecord load_truth(const std::string& path);

// A fit plus everything needed to reproduce and reuse it.
struct FitBundle {
  FitResult fit;
  Hyperpriors priors;
  int J = 0;
  int K = 0;
  std::vector<std::int64_t> agent_ids;
  std::string config_echo;  // resolved run configuration as JSON text
};

// Versioned JSON, matrices row-major with declared dimensions and SPD flags
// that are re-verified on load.
void save_fit(const FitBundle& bundle, const std::string& path);
FitBundle load_fit(const std::string& path);

// One row per retained draw: chain, draw, zeta, vech(Omega), a.
void save_draws(const PosteriorDraws& draws, const std::string& path,
                const std::string& comment = "");
PosteriorDraws load_draws(const std::string& path);

void save_trace_csv(const FitResult& fit, const std::string& path,
                    const std::string& comment = "");

}  // namespace mmnl

#endif  // MMNL_DATA_IO_HPP

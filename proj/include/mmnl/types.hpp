#ifndef MMNL_TYPES_HPP
#define MMNL_TYPES_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace mmnl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One observed choice occasion: a J x K attribute matrix (one row per
// alternative) and the index of the alternative that was chosen.
struct ChoiceEvent {
  std::int64_t event_id = 0;
  Matrix x;    // J x K
  int chosen = 0;  // in [0, J)
};

struct AgentData {
  std::int64_t agent_id = 0;
  std::vector<ChoiceEvent> events;

  int num_events() const { return static_cast<int>(events.size()); }
};

struct ChoiceDataset {
  std::vector<AgentData> agents;
  int J = 0;
  int K = 0;

  int H() const { return static_cast<int>(agents.size()); }

  // Checks dimensions, chosen-index ranges and agent-id uniqueness.
  // Throws std::invalid_argument on violation.
  void validate() const;
};

struct Hyperpriors {
  Vector mu0;     // K
  Matrix Sigma0;  // K x K SPD
  double nu = 2.0;
  Vector A;       // K, positive scale hyperparameters

  // mu0 = 0, Sigma0 = 1e6 I, nu = 2, A_k = 1e3.
  static Hyperpriors vague(int K);
  void validate(int K) const;
};

struct LocalVarParams {
  Vector mu;     // K
  Matrix Sigma;  // K x K SPD
};

// Variational factors for the global variables. omega and b are fixed by
// (H, nu, K) at construction and never change afterwards. upsilon_inv caches
// the Cholesky-based inverse of Upsilon; every assignment to Upsilon must go
// through set_upsilon so the cache stays in sync.
struct GlobalVarParams {
  Vector mu_zeta;
  Matrix Sigma_zeta;
  double omega = 0.0;
  Matrix Upsilon;
  Vector b;
  Vector c;

  Matrix upsilon_inv;
  int jitter_events = 0;

  // Algorithm start state: mu_zeta = 0, Sigma_zeta = 0.01 I,
  // Upsilon = (omega - K + 1) I, c = b.
  static GlobalVarParams init(int H, int K, const Hyperpriors& priors);

  void set_upsilon(Matrix upsilon);

 private:
  void refresh_upsilon_inv();
};

// Non-variational model parameters (one point in the joint posterior);
// used by the log-joint evaluation and the MCMC sampler.
struct ModelParams {
  std::vector<Vector> betas;  // H entries, each K
  Vector zeta;
  Matrix Omega;  // SPD
  Vector a;      // positive
};

}  // namespace mmnl

#endif  // MMNL_TYPES_HPP

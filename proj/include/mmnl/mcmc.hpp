#ifndef MMNL_MCMC_HPP
#define MMNL_MCMC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mmnl/sampling.hpp"
#include "mmnl/types.hpp"

namespace mmnl {

struct McmcConfig {
  int chains = 4;
  int iterations = 10000;  // scans per chain
  int thin = 2;
  double burn_in = 0.5;  // fraction of each chain discarded from the front
  double init_rw_scale = 0.4;
  bool keep_betas = false;
  void validate() const;

  int burn_scans() const;      // iterations - retained_scans()
  int retained_scans() const;  // floor(iterations * (1 - burn_in))
  int retained_draws() const;  // floor(retained_scans / thin), per chain
};

struct ChainDraws {
  std::vector<Vector> zeta;
  std::vector<Matrix> omega;
  std::vector<Vector> a;
  // Retained only when keep_betas is set: betas[d] stacks the H agent
  // coefficient vectors of draw d row-wise (H x K).
  std::vector<Matrix> betas;
  std::vector<double> acceptance_rate;  // per agent, whole chain
};

struct PosteriorDraws {
  int K = 0;
  int H = 0;
  std::vector<ChainDraws> chains;
  int total_draws() const;
};

struct GaussianParams {
  Vector mean;
  Matrix cov;
};

// Full conditional of zeta: precision Sigma0^{-1} + H Omega^{-1}.
GaussianParams zeta_conditional(const std::vector<Vector>& betas, const Matrix& omega,
                                const Hyperpriors& priors);

struct InvWishartParams {
  double df = 0.0;
  Matrix scale;
};

// Full conditional of Omega: IW(H + nu + K - 1,
//   sum_h (beta_h - zeta)(beta_h - zeta)' + 2 nu diag(1/a)).
InvWishartParams omega_conditional(const std::vector<Vector>& betas, const Vector& zeta,
                                   const Vector& a, const Hyperpriors& priors);

struct InvGammaParams {
  Vector shape;
  Vector rate;
};

// Full conditional of each a_k: IG((nu+K)/2, nu (Omega^{-1})_kk + A_k^{-2}).
InvGammaParams a_conditional(const Matrix& omega, const Hyperpriors& priors);

Vector gibbs_zeta(const std::vector<Vector>& betas, const Matrix& omega,
                  const Hyperpriors& priors, RngStream& rng);
Matrix gibbs_omega(const std::vector<Vector>& betas, const Vector& zeta,
                   const Vector& a, const Hyperpriors& priors, RngStream& rng);
Vector gibbs_a(const Matrix& omega, const Hyperpriors& priors, RngStream& rng);

struct MhResult {
  Vector beta;
  bool accepted = false;
};

// Random-walk Metropolis step for beta_h with a scaled-identity Gaussian
// proposal and target log p(y_h | beta) + log N(beta; zeta, Omega).
MhResult rw_metropolis_beta(const AgentData& agent, const Vector& current,
                            const Vector& zeta, const Matrix& omega, double scale,
                            RngStream& rng);

// Metropolis-within-Gibbs over all blocks; proposal scales adapt toward a
// 0.234 acceptance rate during burn-in only and are frozen afterwards.
// Retained draws: every thin-th scan of the last retained_scans() scans.
PosteriorDraws run_chains(const ChoiceDataset& dataset, const Hyperpriors& priors,
                          const McmcConfig& cfg, std::uint64_t seed, int threads = 0);

// Potential scale reduction factor for one scalar parameter; series must
// have equal lengths >= 4 and there must be at least 2 chains.
double gelman_rubin(const std::vector<std::vector<double>>& chain_series);

struct PsrfEntry {
  std::string name;
  double psrf = 0.0;
};

// PSRF for every zeta component and Omega diagonal entry.
std::vector<PsrfEntry> psrf_report(const PosteriorDraws& draws);

}  // namespace mmnl

#endif  // MMNL_MCMC_HPP

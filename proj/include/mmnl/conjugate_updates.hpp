#ifndef MMNL_CONJUGATE_UPDATES_HPP
#define MMNL_CONJUGATE_UPDATES_HPP

#include <vector>

#include "mmnl/types.hpp"

namespace mmnl {

// Accumulation kernels shared by the batch coordinate updates and the
// minibatch-scaled stochastic estimates. Both reduce in a fixed pairwise-tree
// order, so results do not depend on thread count or run.
Vector sum_local_means(const std::vector<LocalVarParams>& locals,
                       const std::vector<int>& idx);
Matrix sum_local_scatter(const std::vector<LocalVarParams>& locals,
                         const std::vector<int>& idx, const Vector& mu_zeta);

struct ZetaUpdate {
  Vector mu_zeta;
  Matrix Sigma_zeta;
};

// Sigma_zeta = (Sigma0^{-1} + H omega Upsilon^{-1})^{-1},
// mu_zeta    = Sigma_zeta (Sigma0^{-1} mu0 + omega Upsilon^{-1} sum_h mu_h).
ZetaUpdate update_zeta(const std::vector<LocalVarParams>& locals,
                       const GlobalVarParams& global, const Hyperpriors& priors);

// Upsilon = 2 nu diag(b/c)
//         + sum_h {(mu_h - mu_zeta)(mu_h - mu_zeta)' + Sigma_h} + H Sigma_zeta.
// Reads mu_zeta / Sigma_zeta from `global`, i.e. the values just written by
// update_zeta in the same sweep.
Matrix update_omega_scale(const std::vector<LocalVarParams>& locals,
                          const GlobalVarParams& global, const Hyperpriors& priors);

// c_k = nu omega (Upsilon^{-1})_kk + A_k^{-2}.
Vector update_a(const GlobalVarParams& global, const Hyperpriors& priors);

}  // namespace mmnl

#endif  // MMNL_CONJUGATE_UPDATES_HPP

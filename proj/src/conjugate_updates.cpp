#include "mmnl/conjugate_updates.hpp"

#include "mmnl/linalg.hpp"

namespace mmnl {

Vector sum_local_means(const std::vector<LocalVarParams>& locals,
                       const std::vector<int>& idx) {
  const int K = locals.empty() ? 0 : static_cast<int>(locals.front().mu.size());
  return pairwise_sum<Vector>(
      idx.size(), [&](std::size_t i) -> Vector { return locals[idx[i]].mu; },
      Vector::Zero(K));
}

Matrix sum_local_scatter(const std::vector<LocalVarParams>& locals,
                         const std::vector<int>& idx, const Vector& mu_zeta) {
  const int K = static_cast<int>(mu_zeta.size());
  return pairwise_sum<Matrix>(
      idx.size(),
      [&](std::size_t i) -> Matrix {
        const Vector d = locals[idx[i]].mu - mu_zeta;
        return d * d.transpose() + locals[idx[i]].Sigma;
      },
      Matrix::Zero(K, K));
}

namespace {
std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  return idx;
}
}  // namespace

ZetaUpdate update_zeta(const std::vector<LocalVarParams>& locals,
                       const GlobalVarParams& global, const Hyperpriors& priors) {
  const int H = static_cast<int>(locals.size());
  const int K = static_cast<int>(priors.mu0.size());
  const Matrix sigma0_inv = spd_inverse(priors.Sigma0, "update_zeta Sigma0");
  const Matrix precision = sigma0_inv + H * global.omega * global.upsilon_inv;
  ZetaUpdate out;
  out.Sigma_zeta = spd_inverse(precision, "update_zeta precision");
  const Vector mu_sum = locals.empty()
                            ? Vector::Zero(K)
                            : sum_local_means(locals, all_indices(locals.size()));
  out.mu_zeta =
      out.Sigma_zeta * (sigma0_inv * priors.mu0 + global.omega * (global.upsilon_inv * mu_sum));
  return out;
}

Matrix update_omega_scale(const std::vector<LocalVarParams>& locals,
                          const GlobalVarParams& global, const Hyperpriors& priors) {
  const int H = static_cast<int>(locals.size());
  Matrix upsilon =
      (2.0 * priors.nu * (global.b.array() / global.c.array())).matrix().asDiagonal();
  upsilon += sum_local_scatter(locals, all_indices(locals.size()), global.mu_zeta);
  upsilon += H * global.Sigma_zeta;
  return upsilon;
}

Vector update_a(const GlobalVarParams& global, const Hyperpriors& priors) {
  return (priors.nu * global.omega * global.upsilon_inv.diagonal().array() +
          priors.A.array().pow(-2))
      .matrix();
}

}  // namespace mmnl

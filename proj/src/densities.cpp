#include "mmnl/densities.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mmnl/linalg.hpp"

namespace mmnl {

double log_mvnormal(const Vector& x, const Vector& mean, const Matrix& cov) {
  const auto n = x.size();
  if (mean.size() != n || cov.rows() != n || cov.cols() != n) {
    throw std::invalid_argument("log_mvnormal: dimension mismatch");
  }
  const auto llt = spd_cholesky(cov, "log_mvnormal covariance");
  const Vector d = x - mean;
  const Vector z = llt.matrixL().solve(d);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
                 log_det + z.squaredNorm());
}

double log_multi_gamma(int K, double a) {
  double s = 0.25 * K * (K - 1) * std::log(std::numbers::pi);
  for (int k = 1; k <= K; ++k) {
    s += std::lgamma(a + 0.5 * (1.0 - k));
  }
  return s;
}

double log_inv_wishart(const Matrix& omega, double df, const Matrix& scale) {
  const int K = static_cast<int>(omega.rows());
  const auto omega_llt = spd_cholesky(omega, "log_inv_wishart Omega");
  const double log_det_omega =
      2.0 * omega_llt.matrixLLT().diagonal().array().log().sum();
  const double log_det_scale = spd_log_det(scale, "log_inv_wishart scale");
  const double tr_term =
      omega_llt.solve(scale).trace();  // tr(S Omega^{-1}) = tr(Omega^{-1} S)
  return 0.5 * df * log_det_scale - 0.5 * df * K * std::log(2.0) -
         log_multi_gamma(K, 0.5 * df) -
         0.5 * (df + K + 1.0) * log_det_omega - 0.5 * tr_term;
}

double log_inv_gamma(double x, double shape, double rate) {
  if (!(x > 0.0) || !(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("log_inv_gamma: arguments must be positive");
  }
  return shape * std::log(rate) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - rate / x;
}

}  // namespace mmnl

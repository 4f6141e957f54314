#include "mmnl/sampling.hpp"

#include "mmnl/linalg.hpp"

namespace mmnl {

Vector mvnormal_draw(const Vector& mean, const Matrix& cov, RngStream& rng) {
  const auto llt = spd_cholesky(cov, "mvnormal_draw covariance");
  return mean + llt.matrixL() * rng.normal_vector(static_cast<int>(mean.size()));
}

Matrix wishart_draw(const Matrix& v, double df, RngStream& rng) {
  const int K = static_cast<int>(v.rows());
  const auto llt = spd_cholesky(v, "wishart_draw scale");
  Matrix a = Matrix::Zero(K, K);
  for (int i = 0; i < K; ++i) {
    a(i, i) = std::sqrt(rng.chi_square(df - i));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Matrix la = llt.matrixL() * a;
  return la * la.transpose();
}

Matrix inv_wishart_draw(const Matrix& scale, double df, RngStream& rng) {
  const Matrix scale_inv = spd_inverse(scale, "inv_wishart_draw scale");
  const Matrix w = wishart_draw(scale_inv, df, rng);
  Matrix omega = spd_inverse(w, "inv_wishart_draw precision draw");
  omega = 0.5 * (omega + omega.transpose().eval());
  return omega;
}

double inv_gamma_draw(double shape, double rate, RngStream& rng) {
  return 1.0 / rng.gamma(shape, rate);
}

}  // namespace mmnl

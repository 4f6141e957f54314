#include "mmnl/linalg.hpp"

#include <cmath>
#include <sstream>

#include "mmnl/errors.hpp"

namespace mmnl {

namespace {
std::string condition_report(const Matrix& m, const char* what) {
  std::ostringstream os;
  os << what << ": matrix of size " << m.rows() << "x" << m.cols()
     << " is not positive definite";
  if (m.rows() > 0) {
    const double dmin = m.diagonal().minCoeff();
    const double dmax = m.diagonal().maxCoeff();
    os << " (diag range [" << dmin << ", " << dmax << "]";
    if (dmin > 0.0) os << ", diag ratio " << dmax / dmin;
    os << ")";
  }
  return os.str();
}
}  // namespace

Eigen::LLT<Matrix> spd_cholesky(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(condition_report(m, what));
  }
  return llt;
}

Matrix spd_inverse(const Matrix& m, const char* what) {
  const auto llt = spd_cholesky(m, what);
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

double spd_log_det(const Matrix& m, const char* what) {
  const auto llt = spd_cholesky(m, what);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

bool is_spd(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  if (!m.allFinite()) return false;
  if (!m.isApprox(m.transpose(), 1e-10)) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

double log_sum_exp(const Vector& u) {
  const double m = u.maxCoeff();
  return m + std::log((u.array() - m).exp().sum());
}

}  // namespace mmnl

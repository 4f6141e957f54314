#ifndef MMNL_LINALG_HPP
#define MMNL_LINALG_HPP

#include <cstddef>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mmnl/types.hpp"

namespace mmnl {

// Lower Cholesky factor of an SPD matrix; throws NumericalError with `what`
// and a condition report on failure.
Eigen::LLT<Matrix> spd_cholesky(const Matrix& m, const char* what);

Matrix spd_inverse(const Matrix& m, const char* what);

// log |m| for SPD m via its Cholesky factor.
double spd_log_det(const Matrix& m, const char* what);

bool is_spd(const Matrix& m);

// Numerically stable log(sum_j exp(u_j)), max-shifted.
double log_sum_exp(const Vector& u);

// Fixed-shape pairwise tree reduction: association order depends only on n,
// so sums are identical run to run and across thread counts.
template <class T, class Term>
T pairwise_sum_range(std::size_t lo, std::size_t hi, const Term& term) {
  if (hi - lo <= 8) {
    T acc = term(lo);
    for (std::size_t i = lo + 1; i < hi; ++i) acc += term(i);
    return acc;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  T left = pairwise_sum_range<T>(lo, mid, term);
  left += pairwise_sum_range<T>(mid, hi, term);
  return left;
}

template <class T, class Term>
T pairwise_sum(std::size_t n, const Term& term, const T& zero) {
  if (n == 0) return zero;
  return pairwise_sum_range<T>(0, n, term);
}

}  // namespace mmnl

#endif  // MMNL_LINALG_HPP

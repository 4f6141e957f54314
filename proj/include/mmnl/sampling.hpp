#ifndef MMNL_SAMPLING_HPP
#define MMNL_SAMPLING_HPP

#include "mmnl/rng.hpp"
#include "mmnl/types.hpp"

namespace mmnl {

Vector mvnormal_draw(const Vector& mean, const Matrix& cov, RngStream& rng);

// Wishart(V, df) draw by the Bartlett construction: W = (L A)(L A)' with
// V = L L' and A lower triangular, A_ii^2 ~ chi^2(df - i + 1), A_ij ~ N(0,1).
Matrix wishart_draw(const Matrix& v, double df, RngStream& rng);

// Inverse-Wishart draw under the project convention (density carries
// exp(-0.5 tr(S Omega^{-1}))): Omega = W^{-1} with W ~ Wishart(S^{-1}, df).
Matrix inv_wishart_draw(const Matrix& scale, double df, RngStream& rng);

// Inverse-gamma with shape b and rate c (mean of 1/x equals b/c).
double inv_gamma_draw(double shape, double rate, RngStream& rng);

}  // namespace mmnl

#endif  // MMNL_SAMPLING_HPP

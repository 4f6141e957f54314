#ifndef MMNL_DENSITIES_HPP
#define MMNL_DENSITIES_HPP

#include "mmnl/types.hpp"

namespace mmnl {

double log_mvnormal(const Vector& x, const Vector& mean, const Matrix& cov);

// log Gamma_K(a), the multivariate gamma function.
double log_multi_gamma(int K, double a);

// Inverse-Wishart log density under the project-wide convention
//   p(Omega) = |S|^{df/2} / (2^{df K/2} Gamma_K(df/2))
//              * |Omega|^{-(df+K+1)/2} exp(-0.5 tr(S Omega^{-1})),
// for which E(Omega^{-1}) = df * S^{-1}.
double log_inv_wishart(const Matrix& omega, double df, const Matrix& scale);

// Inverse-gamma with shape b and rate c: p(x) = c^b/Gamma(b) x^{-b-1} e^{-c/x}.
double log_inv_gamma(double x, double shape, double rate);

}  // namespace mmnl

#endif  // MMNL_DENSITIES_HPP

#ifndef MMNL_MODEL_HPP
#define MMNL_MODEL_HPP

#include "mmnl/types.hpp"

namespace mmnl {

// Softmax choice probabilities p_j = exp(x_j' beta) / sum_j' exp(x_j' beta),
// max-shifted for overflow safety. Throws std::invalid_argument on
// non-finite input.
Vector choice_probabilities(const Matrix& x, const Vector& beta);

// sum_t [ x_{t,chosen}' beta - logsumexp_j(x_{tj}' beta) ]
double log_likelihood_agent(const AgentData& agent, const Vector& beta);

// Local coordinate-ascent objective: log-likelihood minus the Gaussian
// penalty (omega/2)(beta - mu_zeta)' Upsilon^{-1} (beta - mu_zeta).
double f_beta(const Vector& beta, const AgentData& agent,
              const GlobalVarParams& global);

struct GradHess {
  Vector grad;
  Matrix hess;
};

Vector grad_f(const Vector& beta, const AgentData& agent,
              const GlobalVarParams& global);

// Gradient and Hessian of f_beta. The Hessian is symmetric negative
// definite: -(softmax curvature) - omega Upsilon^{-1}.
GradHess grad_hess_f(const Vector& beta, const AgentData& agent,
                     const GlobalVarParams& global);

// Second-order approximation of E_q[logsumexp_j(x_j' beta)] for
// q = N(mu_h, Sigma_h):
//   logsumexp(x mu_h) + 0.5 tr{ x' (diag(rho) - rho rho') x Sigma_h },
// rho the softmax at mu_h. Sigma_h = 0 is accepted as a limit input.
double delta_expectation(const LocalVarParams& local, const Matrix& x);

// Log of the full joint density at theta = {beta_1..H, zeta, Omega, a},
// normalizing constants included. Throws std::invalid_argument for non-PD
// Omega or non-positive a.
double log_joint(const ChoiceDataset& dataset, const ModelParams& params,
                 const Hyperpriors& priors);

}  // namespace mmnl

#endif  // MMNL_MODEL_HPP

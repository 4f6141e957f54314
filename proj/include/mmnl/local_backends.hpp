#ifndef MMNL_LOCAL_BACKENDS_HPP
#define MMNL_LOCAL_BACKENDS_HPP

#include <string>

#include "mmnl/errors.hpp"
#include "mmnl/rng.hpp"
#include "mmnl/types.hpp"

namespace mmnl {

enum class BackendKind { kLaplace, kNcvmp, kSlr };

const char* backend_name(BackendKind kind);
BackendKind backend_from_name(const std::string& name);

// Weighted Monte Carlo regression settings for the SLR local update.
struct SlrConfig {
  int iterations = 40;   // N, even and >= 2
  double weight = 0.25;  // w in (0, 1]
  void validate() const;
};

struct BackendConfig {
  BackendKind kind = BackendKind::kLaplace;
  SlrConfig slr;
};

struct BfgsOptions {
  double grad_tol = 1e-6;  // relative: ||g|| <= grad_tol * (1 + |f|)
  int max_iterations = 200;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
};

// Thrown when the quasi-Newton ascent fails to converge; carries the best
// iterate reached and its gradient norm.
class OptimizerFailure : public NumericalError {
 public:
  OptimizerFailure(const std::string& what, Vector best, double grad_norm)
      : NumericalError(what), best_iterate(std::move(best)), gradient_norm(grad_norm) {}
  Vector best_iterate;
  double gradient_norm;
};

// mu_h = argmax f(beta_h) by BFGS ascent with Armijo backtracking started at
// `init`, followed by Newton polishing with the exact Hessian;
// Sigma_h = -Hessian(mu_h)^{-1}.
LocalVarParams laplace_local(const AgentData& agent, const GlobalVarParams& global,
                             const Vector& init, const BfgsOptions& opts = {});

// One fixed-point step of the Gaussian message-passing update under the
// second-order moment approximation. The curvature for the Sigma update is
// evaluated at the incoming mu_h; the mu step then uses the fresh Sigma_h.
LocalVarParams ncvmp_local_step(const AgentData& agent, const GlobalVarParams& global,
                                const LocalVarParams& current);

struct SlrOutcome {
  LocalVarParams local;
  int hessian_rejections = 0;
};

// N iterations of draw -> gradient/Hessian at the draw -> exponentially
// weighted (P, g, m) updates -> refresh of (Sigma_h, mu_h), averaging the
// plain triples over iterations n > N/2. Final Sigma_h = Pbar^{-1},
// mu_h = Sigma_h gbar + mbar. Draws are generated by triangular solves with
// the Cholesky factor of P; P is never inverted explicitly inside the loop.
SlrOutcome slr_local(const AgentData& agent, const GlobalVarParams& global,
                     const LocalVarParams& init, const SlrConfig& cfg, RngStream& rng);

// Single accept/reject step of the weighted precision update; rejects a
// Hessian sample whose use would destroy positive definiteness of P.
// Returns true when the sample was accepted.
bool slr_apply_hessian_sample(Matrix& p, const Matrix& hess_sample, double w);

// Verification report for the Gaussian gradient identities
//   grad_mu E_q{V} = E_q{grad V},  grad_vec(Sigma) E_q{V} = 0.5 vec E_q{hess V}.
// Linear and quadratic V are evaluated through both closed-form routes;
// a log-sum-exp V is checked two-sided by Monte Carlo against the paired
// standard error. Used only by the test suites.
struct SlrIdentityReport {
  double linear_mu_err = 0.0;
  double linear_sigma_err = 0.0;
  double quad_mu_err = 0.0;
  double quad_sigma_err = 0.0;
  double mc_mu_max_se_ratio = 0.0;     // max_j |mean diff_j| / SE_j
  double mc_sigma_max_se_ratio = 0.0;  // same over vec(Sigma) components
  int draws = 0;
};

SlrIdentityReport slr_identity_check(const Matrix& quad_a, const Vector& lin_a,
                                     const Vector& mu, const Matrix& sigma,
                                     int draws, RngStream& rng,
                                     const Matrix* lse_rows = nullptr);

}  // namespace mmnl

#endif  // MMNL_LOCAL_BACKENDS_HPP

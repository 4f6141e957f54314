#include <doctest.h>

#include <Eigen/LU>

#include "mmnl/linalg.hpp"
#include "mmnl/local_backends.hpp"
#include "mmnl/model.hpp"

#include "test_support.hpp"

using namespace mmnl;
using namespace mmnl::testing;

namespace {

// E_q{f} under the second-order moment approximation, as a function of a
// free (mu, Sigma); Sigma need not be symmetric so vec-gradients can be
// probed entrywise.
double delta_objective(const AgentData& agent, const GlobalVarParams& g,
                       const Vector& mu, const Matrix& sigma) {
  double value = 0.0;
  for (const auto& ev : agent.events) {
    value += ev.x.row(ev.chosen).dot(mu) -
             delta_expectation(LocalVarParams{mu, sigma}, ev.x);
  }
  const Vector d = mu - g.mu_zeta;
  value -= 0.5 * g.omega * (d.dot(g.upsilon_inv * d) + (g.upsilon_inv * sigma).trace());
  return value;
}

}  // namespace

TEST_CASE("laplace_local: conjugate case is exact") {
  RngStream rng(61);
  const Hyperpriors priors = Hyperpriors::vague(3);
  const GlobalVarParams g = random_global(rng, 3, 10, priors);
  AgentData empty;
  const auto local = laplace_local(empty, g, rng.normal_vector(3));
  CHECK((local.mu - g.mu_zeta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(rel_err(local.Sigma, Matrix(g.Upsilon / g.omega)) < 1e-10);
}

TEST_CASE("laplace_local: covariance equals the dense inverse of -Hessian") {
  RngStream rng(62);
  const Hyperpriors priors = Hyperpriors::vague(3);
  for (int trial = 0; trial < 10; ++trial) {
    const AgentData agent = random_agent(rng, 4, 3, 8);
    const GlobalVarParams g = random_global(rng, 3, 20, priors);
    const auto local = laplace_local(agent, g, Vector::Zero(3));
    const auto gh = grad_hess_f(local.mu, agent, g);
    const Matrix ref = Eigen::FullPivLU<Matrix>(-gh.hess).inverse();
    CHECK(rel_err(local.Sigma, ref) < 1e-9);
    CHECK(is_spd(local.Sigma));
  }
}

TEST_CASE("laplace_local: no grid point within 1e-3 beats the optimum") {
  RngStream rng(63);
  const Hyperpriors priors = Hyperpriors::vague(2);
  for (int trial = 0; trial < 10; ++trial) {
    const AgentData agent = random_agent(rng, 3, 2, 6);
    const GlobalVarParams g = random_global(rng, 2, 15, priors);
    const auto local = laplace_local(agent, g, Vector::Zero(2));
    const double f_star = f_beta(local.mu, agent, g);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        if (dx == 0 && dy == 0) continue;
        Vector probe = local.mu;
        probe[0] += 1e-3 * dx;
        probe[1] += 1e-3 * dy;
        CHECK(f_beta(probe, agent, g) <= f_star + 1e-12);
      }
    }
  }
}

TEST_CASE("laplace_local: unreachable tolerance raises with the best iterate") {
  RngStream rng(64);
  const Hyperpriors priors = Hyperpriors::vague(2);
  const AgentData agent = random_agent(rng, 3, 2, 6);
  const GlobalVarParams g = random_global(rng, 2, 15, priors);
  BfgsOptions opts;
  opts.grad_tol = 1e-300;
  bool threw = false;
  try {
    laplace_local(agent, g, Vector::Zero(2), opts);
  } catch (const OptimizerFailure& e) {
    threw = true;
    CHECK(e.gradient_norm >= 0.0);
    // The failure still carries the (well-converged) best iterate.
    const auto reference = laplace_local(agent, g, Vector::Zero(2));
    CHECK((e.best_iterate - reference.mu).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK(threw);
}

TEST_CASE("ncvmp_local_step: conjugate case lands on the fixed point in one step") {
  RngStream rng(65);
  const Hyperpriors priors = Hyperpriors::vague(2);
  const GlobalVarParams g = random_global(rng, 2, 10, priors);
  AgentData empty;
  LocalVarParams current{rng.normal_vector(2), random_spd(rng, 2)};
  const auto next = ncvmp_local_step(empty, g, current);
  CHECK((next.mu - g.mu_zeta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(rel_err(next.Sigma, Matrix(g.Upsilon / g.omega)) < 1e-12);
}

TEST_CASE("ncvmp fixed point is stationary for the moment-form objective") {
  RngStream rng(66);
  const Hyperpriors priors = Hyperpriors::vague(2);
  const AgentData agent = random_agent(rng, 3, 2, 6);
  const GlobalVarParams g = random_global(rng, 2, 15, priors);
  LocalVarParams local{Vector::Zero(2), 0.01 * Matrix::Identity(2, 2)};
  for (int it = 0; it < 400; ++it) local = ncvmp_local_step(agent, g, local);
  const auto fixed = ncvmp_local_step(agent, g, local);
  REQUIRE((fixed.mu - local.mu).cwiseAbs().maxCoeff() < 1e-12);

  // Objective with the Gaussian entropy term; gradient must vanish in both
  // mu and every Sigma entry at the fixed point.
  const auto objective = [&](const Vector& mu, const Matrix& sigma) {
    return delta_objective(agent, g, mu, sigma) +
           0.5 * std::log(Eigen::FullPivLU<Matrix>(sigma).determinant());
  };
  const Vector grad_mu = fd_gradient(
      [&](const Vector& m) { return objective(m, local.Sigma); }, local.mu, 1e-6);
  CHECK(grad_mu.cwiseAbs().maxCoeff() < 1e-6);
  double max_sigma_grad = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double h = 1e-7;
      Matrix up = local.Sigma, dn = local.Sigma;
      up(i, j) += h;
      dn(i, j) -= h;
      max_sigma_grad = std::max(
          max_sigma_grad,
          std::abs(objective(local.mu, up) - objective(local.mu, dn)) / (2.0 * h));
    }
  }
  CHECK(max_sigma_grad < 1e-6);
}

TEST_CASE("ncvmp step matches the generic Gaussian fixed-point formula") {
  RngStream rng(67);
  const Hyperpriors priors = Hyperpriors::vague(2);
  const AgentData agent = random_agent(rng, 3, 2, 7);
  const GlobalVarParams g = random_global(rng, 2, 12, priors);
  const LocalVarParams current{0.3 * rng.normal_vector(2),
                               0.2 * random_spd(rng, 2)};

  // Generic route: Sigma <- -(2 vec^{-1} grad_vec(Sigma) E)^{-1}, then
  // mu <- mu + Sigma grad_mu E with the fresh Sigma, all gradients by
  // central differences of the scalar objective.
  Matrix sigma_grad(2, 2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double h = 1e-6;
      Matrix up = current.Sigma, dn = current.Sigma;
      up(i, j) += h;
      dn(i, j) -= h;
      sigma_grad(i, j) = (delta_objective(agent, g, current.mu, up) -
                          delta_objective(agent, g, current.mu, dn)) /
                         (2.0 * h);
    }
  }
  const Matrix sigma_generic = Eigen::FullPivLU<Matrix>(-2.0 * sigma_grad).inverse();
  const Vector mu_grad = fd_gradient(
      [&](const Vector& m) { return delta_objective(agent, g, m, sigma_generic); },
      current.mu, 1e-6);
  const Vector mu_generic = current.mu + sigma_generic * mu_grad;

  const auto step = ncvmp_local_step(agent, g, current);
  CHECK(rel_err(step.Sigma, sigma_generic) < 1e-5);
  CHECK(rel_err(step.mu, mu_generic) < 1e-5);
}

TEST_CASE("ncvmp_local_step: non-SPD intermediate is reported") {
  RngStream rng(68);
  const Hyperpriors priors = Hyperpriors::vague(2);
  GlobalVarParams g = random_global(rng, 2, 10, priors);
  g.upsilon_inv = -Matrix::Identity(2, 2);  // corrupt the cache on purpose
  AgentData empty;
  CHECK_THROWS_AS(
      ncvmp_local_step(empty, g, LocalVarParams{Vector::Zero(2), Matrix::Identity(2, 2)}),
      NumericalError);
}

TEST_CASE("slr_local: conjugate case is exact for every seed") {
  RngStream rng(69);
  const Hyperpriors priors = Hyperpriors::vague(2);
  const GlobalVarParams g = random_global(rng, 2, 10, priors);
  AgentData empty;
  const SlrConfig cfg;
  CHECK(cfg.iterations == 40);
  CHECK(cfg.weight == 0.25);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream stream = RngStream::derive(seed, RngDomain::kLocalBackend, 1, 1);
    const auto out = slr_local(empty, g,
                               LocalVarParams{rng.normal_vector(2), random_spd(rng, 2)},
                               cfg, stream);
    CHECK(out.hessian_rejections == 0);
    CHECK((out.local.mu - g.mu_zeta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(rel_err(out.local.Sigma, Matrix(g.Upsilon / g.omega)) < 1e-8);
  }
}

TEST_CASE("slr_local: close to the Laplace solution on a K=2 instance") {
  RngStream rng(70);
  const Hyperpriors priors = Hyperpriors::vague(2);
  const AgentData agent = random_agent(rng, 3, 2, 10);
  const GlobalVarParams g = random_global(rng, 2, 20, priors);
  const auto laplace = laplace_local(agent, g, Vector::Zero(2));
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    RngStream stream = RngStream::derive(seed, RngDomain::kLocalBackend, 1, 1);
    const auto out = slr_local(
        agent, g, LocalVarParams{Vector::Zero(2), 0.01 * Matrix::Identity(2, 2)},
        SlrConfig{}, stream);
    CHECK((out.local.mu - laplace.mu).cwiseAbs().maxCoeff() < 0.05);
    CHECK(is_spd(out.local.Sigma));
  }
}

TEST_CASE("slr_local is deterministic given the stream") {
  RngStream rng(71);
  const Hyperpriors priors = Hyperpriors::vague(2);
  const AgentData agent = random_agent(rng, 3, 2, 5);
  const GlobalVarParams g = random_global(rng, 2, 10, priors);
  const LocalVarParams init{Vector::Zero(2), 0.01 * Matrix::Identity(2, 2)};
  RngStream s1 = RngStream::derive(7, RngDomain::kLocalBackend, 42, 3);
  RngStream s2 = RngStream::derive(7, RngDomain::kLocalBackend, 42, 3);
  const auto a = slr_local(agent, g, init, SlrConfig{}, s1);
  const auto b = slr_local(agent, g, init, SlrConfig{}, s2);
  CHECK((a.local.mu - b.local.mu).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.local.Sigma - b.local.Sigma).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("SlrConfig validation") {
  SlrConfig odd;
  odd.iterations = 5;
  CHECK_THROWS_AS(odd.validate(), std::invalid_argument);
  SlrConfig zero_w;
  zero_w.weight = 0.0;
  CHECK_THROWS_AS(zero_w.validate(), std::invalid_argument);
  SlrConfig big_w;
  big_w.weight = 1.5;
  CHECK_THROWS_AS(big_w.validate(), std::invalid_argument);
}

TEST_CASE("slr_apply_hessian_sample rejects samples that break SPD") {
  Matrix p = Matrix::Identity(2, 2);
  // A positive definite "Hessian" sample with w = 1 would flip the sign.
  Matrix bad = 5.0 * Matrix::Identity(2, 2);
  const Matrix before = p;
  CHECK_FALSE(slr_apply_hessian_sample(p, bad, 1.0));
  CHECK((p - before).cwiseAbs().maxCoeff() == 0.0);

  Matrix good = -3.0 * Matrix::Identity(2, 2);
  CHECK(slr_apply_hessian_sample(p, good, 0.5));
  CHECK(rel_err(p, Matrix(2.0 * Matrix::Identity(2, 2))) < 1e-14);
}

TEST_CASE("all three backends agree exactly in the conjugate case") {
  RngStream rng(72);
  const Hyperpriors priors = Hyperpriors::vague(3);
  const GlobalVarParams g = random_global(rng, 3, 8, priors);
  AgentData empty;
  const auto lap = laplace_local(empty, g, rng.normal_vector(3));
  const auto ncv = ncvmp_local_step(empty, g,
                                    LocalVarParams{rng.normal_vector(3), random_spd(rng, 3)});
  RngStream stream = RngStream::derive(5, RngDomain::kLocalBackend, 9, 2);
  const auto slr = slr_local(empty, g,
                             LocalVarParams{rng.normal_vector(3), random_spd(rng, 3)},
                             SlrConfig{}, stream);
  const Vector target = g.mu_zeta;
  const Matrix target_sigma = g.Upsilon / g.omega;
  CHECK((lap.mu - target).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((ncv.mu - target).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((slr.local.mu - target).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(rel_err(lap.Sigma, target_sigma) < 1e-8);
  CHECK(rel_err(ncv.Sigma, target_sigma) < 1e-8);
  CHECK(rel_err(slr.local.Sigma, target_sigma) < 1e-8);
}

TEST_CASE("all backends return SPD covariances on random instances") {
  RngStream rng(75);
  const Hyperpriors priors = Hyperpriors::vague(2);
  for (int trial = 0; trial < 10; ++trial) {
    const AgentData agent = random_agent(rng, 3, 2, 5);
    const GlobalVarParams g = random_global(rng, 2, 10, priors);
    CHECK(is_spd(laplace_local(agent, g, Vector::Zero(2)).Sigma));
    CHECK(is_spd(
        ncvmp_local_step(agent, g, LocalVarParams{Vector::Zero(2), Matrix::Identity(2, 2)})
            .Sigma));
    RngStream stream = RngStream::derive(trial, RngDomain::kLocalBackend, 3, 4);
    CHECK(is_spd(slr_local(agent, g,
                           LocalVarParams{Vector::Zero(2), 0.01 * Matrix::Identity(2, 2)},
                           SlrConfig{}, stream)
                     .local.Sigma));
  }
}

TEST_CASE("Laplace and NCVMP curvature agree at a matched location") {
  RngStream rng(73);
  const Hyperpriors priors = Hyperpriors::vague(2);
  const AgentData agent = random_agent(rng, 4, 2, 6);
  const GlobalVarParams g = random_global(rng, 2, 12, priors);
  const Vector mu = rng.normal_vector(2);
  const auto gh = grad_hess_f(mu, agent, g);
  const Matrix laplace_sigma = spd_inverse(-gh.hess, "test");
  const auto step = ncvmp_local_step(agent, g, LocalVarParams{mu, Matrix::Identity(2, 2)});
  CHECK(rel_err(step.Sigma, laplace_sigma) < 1e-12);
}

TEST_CASE("slr_identity_check: exact identities and Monte Carlo agreement") {
  RngStream rng(74);
  const int K = 2;
  Matrix quad = random_spd(rng, K);
  quad = 0.5 * (quad + quad.transpose().eval());
  const Vector lin = rng.normal_vector(K);
  const Vector mu = rng.normal_vector(K);
  const Matrix sigma = random_spd(rng, K);

  RngStream mc = RngStream::derive(99, RngDomain::kAssessment, 0, 0);
  const auto report = slr_identity_check(quad, lin, mu, sigma, 100000, mc);
  CHECK(report.linear_mu_err < 1e-8);
  CHECK(report.linear_sigma_err < 1e-8);
  CHECK(report.quad_mu_err < 1e-8);
  CHECK(report.quad_sigma_err < 1e-8);
  CHECK(report.mc_mu_max_se_ratio <= 4.0);
  CHECK(report.mc_sigma_max_se_ratio <= 4.0);
}

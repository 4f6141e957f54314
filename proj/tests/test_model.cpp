#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "mmnl/linalg.hpp"
#include "mmnl/model.hpp"

#include "test_support.hpp"

using namespace mmnl;
using namespace mmnl::testing;

namespace {

GlobalVarParams scalar_global(double omega, double upsilon, double mu_zeta) {
  GlobalVarParams g;
  g.omega = omega;
  g.mu_zeta = Vector::Constant(1, mu_zeta);
  g.Sigma_zeta = Matrix::Identity(1, 1);
  g.b = Vector::Constant(1, 1.0);
  g.c = Vector::Constant(1, 1.0);
  g.set_upsilon(upsilon * Matrix::Identity(1, 1));
  return g;
}

}  // namespace

TEST_CASE("vague hyperprior defaults") {
  const auto p = Hyperpriors::vague(4);
  CHECK(p.mu0.isZero(0.0));
  CHECK((p.Sigma0 - 1e6 * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.nu == 2.0);
  CHECK((p.A.array() == 1e3).all());
  p.validate(4);
}

TEST_CASE("global parameter start state") {
  const auto priors = Hyperpriors::vague(2);
  const auto g = GlobalVarParams::init(7, 2, priors);
  CHECK(g.omega == 7 + 2 + 2 - 1.0);
  CHECK((g.b.array() == 0.5 * (2.0 + 2)).all());
  CHECK((g.c - g.b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.mu_zeta.isZero(0.0));
  CHECK((g.Sigma_zeta - 0.01 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((g.Upsilon - (g.omega - 2 + 1) * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(g.jitter_events == 0);
}

TEST_CASE("choice_probabilities: zero coefficients give the uniform vector") {
  RngStream rng(1);
  for (const int J : {2, 5, 9}) {
    Matrix x(J, 3);
    for (int j = 0; j < J; ++j) x.row(j) = rng.normal_vector(3).transpose();
    const Vector p = choice_probabilities(x, Vector::Zero(3));
    for (int j = 0; j < J; ++j) CHECK(p[j] == doctest::Approx(1.0 / J).epsilon(1e-14));
  }
}

TEST_CASE("choice_probabilities: analytic binary case") {
  Matrix x(2, 1);
  x << 1.0, 0.0;
  Vector beta(1);
  beta << std::log(3.0);
  const Vector p = choice_probabilities(x, beta);
  CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("choice_probabilities: simplex output and shift invariance") {
  RngStream rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int J = 2 + static_cast<int>(rng.uniform_int(5));
    const int K = 1 + static_cast<int>(rng.uniform_int(4));
    Matrix x(J, K);
    for (int j = 0; j < J; ++j) x.row(j) = rng.normal_vector(K).transpose();
    const Vector beta = rng.normal_vector(K);
    const Vector p = choice_probabilities(x, beta);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);

    const Vector shift = rng.normal_vector(K);
    Matrix x_shifted = x;
    x_shifted.rowwise() += shift.transpose();
    const Vector p_shifted = choice_probabilities(x_shifted, beta);
    CHECK((p - p_shifted).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("choice_probabilities: huge utilities stay finite") {
  Matrix x(3, 1);
  x << 1000.0, -1000.0, 0.0;
  Vector beta(1);
  beta << 1.0;
  const Vector p = choice_probabilities(x, beta);
  CHECK(p.allFinite());
  CHECK(p[0] == doctest::Approx(1.0));
}

TEST_CASE("choice_probabilities: non-finite input rejected") {
  Matrix x(2, 1);
  x << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(choice_probabilities(x, Vector::Ones(1)), std::invalid_argument);
  Matrix ok(2, 1);
  ok << 1.0, 0.0;
  Vector bad(1);
  bad << std::nan("");
  CHECK_THROWS_AS(choice_probabilities(ok, bad), std::invalid_argument);
}

TEST_CASE("log_likelihood_agent basics") {
  RngStream rng(3);
  AgentData empty;
  empty.agent_id = 1;
  CHECK(log_likelihood_agent(empty, Vector::Zero(2)) == 0.0);

  const AgentData uniform_agent = random_agent(rng, 4, 3, 5);
  CHECK(log_likelihood_agent(uniform_agent, Vector::Zero(3)) ==
        doctest::Approx(5.0 * std::log(0.25)).epsilon(1e-13));

  // Composition oracle: summed logs of per-event probabilities.
  for (int trial = 0; trial < 20; ++trial) {
    const AgentData agent = random_agent(rng, 3, 2, 6);
    const Vector beta = rng.normal_vector(2);
    double expected = 0.0;
    for (const auto& ev : agent.events) {
      expected += std::log(choice_probabilities(ev.x, beta)[ev.chosen]);
    }
    CHECK(log_likelihood_agent(agent, beta) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("f_beta: zero at the prior center with no events") {
  GlobalVarParams g = scalar_global(4.0, 4.0, 0.0);
  AgentData empty;
  CHECK(f_beta(g.mu_zeta, empty, g) == 0.0);
}

TEST_CASE("f_beta: hand-evaluated quadratic") {
  GlobalVarParams g = scalar_global(4.0, 4.0, 0.0);
  AgentData empty;
  const double f = f_beta(Vector::Constant(1, 2.0), empty, g);
  CHECK(f == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("f_beta: composition of likelihood and an independent dense solve") {
  RngStream rng(4);
  const Hyperpriors priors = Hyperpriors::vague(3);
  for (int trial = 0; trial < 20; ++trial) {
    const AgentData agent = random_agent(rng, 4, 3, 5);
    const GlobalVarParams g = random_global(rng, 3, 10, priors);
    const Vector beta = rng.normal_vector(3);
    const Vector d = beta - g.mu_zeta;
    const Vector solved = Eigen::FullPivLU<Matrix>(g.Upsilon).solve(d);
    const double expected =
        log_likelihood_agent(agent, beta) - 0.5 * g.omega * d.dot(solved);
    CHECK(f_beta(beta, agent, g) == doctest::Approx(expected).epsilon(1e-11));
  }
}

TEST_CASE("grad_hess_f: pure quadratic case") {
  RngStream rng(5);
  const Hyperpriors priors = Hyperpriors::vague(3);
  const GlobalVarParams g = random_global(rng, 3, 10, priors);
  AgentData empty;
  const auto gh = grad_hess_f(g.mu_zeta, empty, g);
  CHECK(gh.grad.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(rel_err(gh.hess, Matrix(-g.omega * g.upsilon_inv)) < 1e-12);
}

TEST_CASE("grad_hess_f matches finite differences on random instances") {
  RngStream rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const int J = 2 + static_cast<int>(rng.uniform_int(5));  // <= 6
    const int K = 1 + static_cast<int>(rng.uniform_int(5));  // <= 5
    const int T = static_cast<int>(rng.uniform_int(11));     // <= 10
    const Hyperpriors priors = Hyperpriors::vague(K);
    const AgentData agent = random_agent(rng, J, K, T);
    const GlobalVarParams g = random_global(rng, K, 20, priors);
    const Vector beta = rng.normal_vector(K);

    const auto gh = grad_hess_f(beta, agent, g);
    const Vector fd_grad =
        fd_gradient([&](const Vector& b) { return f_beta(b, agent, g); }, beta);
    CHECK(rel_err(fd_grad, gh.grad) < 1e-6);

    const Matrix fd_hess = fd_jacobian(
        [&](const Vector& b) { return grad_hess_f(b, agent, g).grad; }, beta);
    CHECK(rel_err(fd_hess, gh.hess) < 1e-5);
  }
}

TEST_CASE("grad_hess_f: Hessian dominated by the prior curvature") {
  RngStream rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const int K = 2 + static_cast<int>(rng.uniform_int(3));
    const Hyperpriors priors = Hyperpriors::vague(K);
    const AgentData agent = random_agent(rng, 4, K, 6);
    const GlobalVarParams g = random_global(rng, K, 15, priors);
    const Vector beta = rng.normal_vector(K);
    const auto gh = grad_hess_f(beta, agent, g);
    const Matrix slack = -gh.hess - g.omega * g.upsilon_inv;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (slack + slack.transpose()));
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("f_beta is concave along random chords") {
  RngStream rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 1 + static_cast<int>(rng.uniform_int(4));
    const Hyperpriors priors = Hyperpriors::vague(K);
    const AgentData agent = random_agent(rng, 3, K, 5);
    const GlobalVarParams g = random_global(rng, K, 10, priors);
    const Vector b1 = rng.normal_vector(K);
    const Vector b2 = rng.normal_vector(K);
    const double lambda = rng.uniform();
    const Vector mid = lambda * b1 + (1.0 - lambda) * b2;
    CHECK(f_beta(mid, agent, g) >=
          lambda * f_beta(b1, agent, g) + (1.0 - lambda) * f_beta(b2, agent, g) -
              1e-10);
  }
}

TEST_CASE("delta_expectation: degenerate cases") {
  RngStream rng(9);
  Matrix x(3, 2);
  for (int j = 0; j < 3; ++j) x.row(j) = rng.normal_vector(2).transpose();
  LocalVarParams local;
  local.mu = rng.normal_vector(2);
  local.Sigma = Matrix::Zero(2, 2);
  CHECK(delta_expectation(local, x) ==
        doctest::Approx(log_sum_exp(x * local.mu)).epsilon(1e-14));

  Matrix single(1, 2);
  single << 0.7, -0.3;
  local.Sigma = random_spd(rng, 2);
  CHECK(delta_expectation(local, single) ==
        doctest::Approx(single.row(0).dot(local.mu)).epsilon(1e-14));
}

TEST_CASE("delta_expectation rejects non-finite input") {
  Matrix x(2, 1);
  x << 1.0, 0.0;
  LocalVarParams bad{Vector::Constant(1, std::nan("")), Matrix::Identity(1, 1)};
  CHECK_THROWS_AS(delta_expectation(bad, x), std::invalid_argument);
}

TEST_CASE("delta_expectation dominates the plug-in value") {
  RngStream rng(10);
  for (int trial = 0; trial < 40; ++trial) {
    const int J = 2 + static_cast<int>(rng.uniform_int(4));
    Matrix x(J, 3);
    for (int j = 0; j < J; ++j) x.row(j) = rng.normal_vector(3).transpose();
    LocalVarParams local{rng.normal_vector(3), 0.3 * random_spd(rng, 3)};
    CHECK(delta_expectation(local, x) >= log_sum_exp(x * local.mu) - 1e-12);
  }
}

TEST_CASE("delta_expectation agrees with Monte Carlo for small covariance") {
  RngStream rng(11);
  Matrix x(4, 2);
  for (int j = 0; j < 4; ++j) x.row(j) = rng.normal_vector(2).transpose();
  LocalVarParams local;
  local.mu = rng.normal_vector(2);
  Matrix sigma = random_spd(rng, 2);
  sigma *= 1e-4 / sigma.norm();
  local.Sigma = sigma;

  const auto llt = spd_cholesky(local.Sigma, "test");
  RunningStat stat;
  for (int i = 0; i < 1000000; ++i) {
    const Vector beta = local.mu + llt.matrixL() * rng.normal_vector(2);
    stat.add(log_sum_exp(x * beta));
  }
  const double delta = delta_expectation(local, x);
  CHECK(std::abs(stat.mean() - delta) < 3.0 * stat.se());
}

TEST_CASE("log_joint: prior-only value matches reference densities") {
  // Reference computed with an independent statistics library.
  ChoiceDataset empty;
  empty.J = 3;
  empty.K = 2;
  Hyperpriors priors;
  priors.mu0 = Vector(2);
  priors.mu0 << 0.5, -1.0;
  priors.Sigma0 = Matrix(2, 2);
  priors.Sigma0 << 2.0, 0.3, 0.3, 1.0;
  priors.nu = 2.0;
  priors.A = Vector(2);
  priors.A << 2.0, 3.0;

  ModelParams params;
  params.zeta = Vector(2);
  params.zeta << 0.2, 0.1;
  params.Omega = Matrix(2, 2);
  params.Omega << 1.5, -0.2, -0.2, 0.8;
  params.a = Vector(2);
  params.a << 1.2, 0.7;

  CHECK(log_joint(empty, params, priors) ==
        doctest::Approx(-9.312229643814373).epsilon(1e-12));
}

TEST_CASE("log_joint: beta gradient equals grad of f_beta when moments match") {
  RngStream rng(12);
  const int K = 3;
  const Hyperpriors priors = Hyperpriors::vague(K);
  GlobalVarParams g = random_global(rng, K, 1, priors);

  ChoiceDataset dataset;
  dataset.J = 4;
  dataset.K = K;
  dataset.agents.push_back(random_agent(rng, 4, K, 5));

  ModelParams params;
  params.zeta = g.mu_zeta;
  params.Omega = g.Upsilon / g.omega;  // so Omega^{-1} = omega Upsilon^{-1}
  params.a = Vector::Ones(K);
  params.betas.push_back(rng.normal_vector(K));

  const Vector fd = fd_gradient(
      [&](const Vector& b) {
        ModelParams p = params;
        p.betas[0] = b;
        return log_joint(dataset, p, priors);
      },
      params.betas[0]);
  const Vector expected = grad_hess_f(params.betas[0], dataset.agents[0], g).grad;
  CHECK(rel_err(fd, expected) < 1e-6);
}

TEST_CASE("log_joint: doubling the a_k prior rate shifts by the analytic amount") {
  ChoiceDataset empty;
  empty.J = 2;
  empty.K = 1;
  Hyperpriors priors = Hyperpriors::vague(1);
  priors.A[0] = 2.0;
  ModelParams params;
  params.zeta = Vector::Zero(1);
  params.Omega = Matrix::Identity(1, 1);
  params.a = Vector::Constant(1, 0.9);

  Hyperpriors doubled = priors;
  doubled.A[0] = priors.A[0] / std::sqrt(2.0);  // doubles 1/A^2

  const double rate = 1.0 / (priors.A[0] * priors.A[0]);
  const double expected_shift = 0.5 * std::log(2.0) - rate / params.a[0];
  CHECK(log_joint(empty, params, doubled) - log_joint(empty, params, priors) ==
        doctest::Approx(expected_shift).epsilon(1e-12));
}

TEST_CASE("log_joint rejects invalid parameters") {
  ChoiceDataset empty;
  empty.J = 2;
  empty.K = 2;
  const Hyperpriors priors = Hyperpriors::vague(2);
  ModelParams params;
  params.zeta = Vector::Zero(2);
  params.a = Vector::Ones(2);
  params.Omega = Matrix(2, 2);
  params.Omega << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_AS(log_joint(empty, params, priors), std::invalid_argument);
  params.Omega = Matrix::Identity(2, 2);
  params.a[1] = -0.1;
  CHECK_THROWS_AS(log_joint(empty, params, priors), std::invalid_argument);
}

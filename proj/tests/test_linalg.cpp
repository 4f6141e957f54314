#include <doctest.h>

#include <Eigen/LU>

#include "mmnl/densities.hpp"
#include "mmnl/errors.hpp"
#include "mmnl/linalg.hpp"
#include "mmnl/sampling.hpp"

#include "test_support.hpp"

using namespace mmnl;

TEST_CASE("spd_cholesky rejects indefinite matrices with a report") {
  Matrix m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(spd_cholesky(m, "unit test"), NumericalError);
  try {
    spd_cholesky(m, "unit test");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("unit test") != std::string::npos);
  }
}

TEST_CASE("spd_inverse matches a dense LU inverse") {
  RngStream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = testing::random_spd(rng, 4);
    const Matrix inv = spd_inverse(m, "test");
    const Matrix ref = Eigen::FullPivLU<Matrix>(m).inverse();
    CHECK(testing::rel_err(inv, ref) < 1e-10);
  }
}

TEST_CASE("pairwise_sum matches serial summation and is order-stable") {
  RngStream rng(17);
  std::vector<double> values(1000);
  for (auto& v : values) v = rng.normal();
  const double serial = [&] {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }();
  const double tree1 =
      pairwise_sum<double>(values.size(), [&](std::size_t i) { return values[i]; }, 0.0);
  const double tree2 =
      pairwise_sum<double>(values.size(), [&](std::size_t i) { return values[i]; }, 0.0);
  CHECK(tree1 == tree2);
  CHECK(tree1 == doctest::Approx(serial).epsilon(1e-12));

  const Matrix zero = Matrix::Zero(2, 2);
  const Matrix msum = pairwise_sum<Matrix>(
      0, [&](std::size_t) { return Matrix::Identity(2, 2); }, zero);
  CHECK(msum.isZero(0.0));
}

TEST_CASE("log_sum_exp is exact on small inputs and safe on huge ones") {
  Vector u(3);
  u << 0.1, -0.4, 1.3;
  const double naive = std::log(std::exp(0.1) + std::exp(-0.4) + std::exp(1.3));
  CHECK(log_sum_exp(u) == doctest::Approx(naive).epsilon(1e-14));

  Vector big(2);
  big << 1000.0, 1001.0;
  const double expect = 1001.0 + std::log1p(std::exp(-1.0));
  CHECK(std::isfinite(log_sum_exp(big)));
  CHECK(log_sum_exp(big) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("log densities match reference values") {
  // Reference numbers computed with an independent statistics library.
  Vector x(3), m(3);
  x << 0.3, -1.2, 0.7;
  m << 0.1, 0.0, -0.5;
  Matrix c(3, 3);
  c << 1.2, 0.2, 0.1, 0.2, 0.9, -0.3, 0.1, -0.3, 1.5;
  CHECK(log_mvnormal(x, m, c) == doctest::Approx(-4.025310526001804).epsilon(1e-12));

  CHECK(log_multi_gamma(3, 2.3) == doctest::Approx(1.692025601311498).epsilon(1e-12));

  CHECK(log_inv_gamma(0.8, 2.5, 1.7) ==
        doctest::Approx(-0.302109813217759).epsilon(1e-12));

  Matrix w(2, 2), s(2, 2);
  w << 2.0, 0.4, 0.4, 1.1;
  s << 1.5, -0.2, -0.2, 0.9;
  CHECK(log_inv_wishart(w, 5.5, s) ==
        doctest::Approx(-8.157026795432976).epsilon(1e-12));
}

TEST_CASE("inverse-Wishart convention: E(Omega^{-1}) = df * scale^{-1}") {
  RngStream rng(31);
  const int K = 2;
  Matrix scale(2, 2);
  scale << 2.0, 0.5, 0.5, 1.5;
  const double df = 7.0;
  Matrix acc = Matrix::Zero(K, K);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const Matrix omega = inv_wishart_draw(scale, df, rng);
    acc += spd_inverse(omega, "test");
  }
  acc /= n;
  const Matrix expect = df * spd_inverse(scale, "test");
  CHECK(testing::rel_err(acc, expect) < 0.02);
}

#include "gbsde/error.hpp"
#include "gbsde/gfunction.hpp"

#include <doctest.h>

#include <random>

using namespace gbsde;

namespace {

// Brute-force maximum of 1/2 q a over a fine grid of q in [low, high].
double brute_g(const GParams& p, double a) {
  double best = -1e300;
  for (int k = 0; k <= 1000; ++k) {
    const double q = p.sigma_low_sq + (p.sigma_high_sq - p.sigma_low_sq) * k / 1000.0;
    best = std::max(best, 0.5 * q * a);
  }
  return best;
}

}  // namespace

TEST_CASE("scalar G on the worked values") {
  const GParams p = GParams::make(0.5, 1.0);
  CHECK(g_value(p, 0.0) == 0.0);
  CHECK(g_value(p, 2.0) == 1.0);
  CHECK(g_value(p, -2.0) == -0.5);
}

TEST_CASE("scalar G agrees with the sup over the variance interval") {
  const GParams p = GParams::make(0.3, 1.7);
  for (double a : {-5.0, -1.0, -1e-3, 0.0, 1e-3, 0.7, 12.0}) CHECK(g_value(p, a) == doctest::Approx(brute_g(p, a)));
}

TEST_CASE("worst_case_q picks the maximizer and breaks the tie upward") {
  const GParams p = GParams::make(0.5, 1.0);
  CHECK(worst_case_q(p, 3.0) == 1.0);
  CHECK(worst_case_q(p, -3.0) == 0.5);
  CHECK(worst_case_q(p, 0.0) == 1.0);
  for (double a : {-2.0, -0.1, 0.0, 0.4, 9.0}) CHECK(g_value(p, a) == 0.5 * worst_case_q(p, a) * a);
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(GParams::make(0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(GParams::make(1.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(GParams::make(0.5, std::numeric_limits<double>::infinity()), InvalidArgument);
  CHECK_NOTHROW(GParams::make(1.0, 1.0));
}

TEST_CASE("structural inequalities on random pairs") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ua(-50.0, 50.0), ul(0.0, 10.0);
  const GParams p = GParams::make(0.25, 2.0);
  for (int k = 0; k < 20000; ++k) {
    double a = ua(rng), b = ua(rng);
    if (a < b) std::swap(a, b);
    const double d = g_value(p, a) - g_value(p, b);
    CHECK(d >= 0.5 * p.sigma_low_sq * (a - b) - 1e-12);
    CHECK(d <= 0.5 * p.sigma_high_sq * (a - b) + 1e-12);
    CHECK(g_value(p, a + b) <= g_value(p, a) + g_value(p, b) + 1e-12);
    const double lam = ul(rng);
    CHECK(g_value(p, lam * a) == doctest::Approx(lam * g_value(p, a)).epsilon(1e-14));
  }
}

TEST_CASE("matrix G on the worked values") {
  GammaSet id({Eigen::MatrixXd::Identity(2, 2)});
  CHECK(g_value_matrix(id, Eigen::Vector2d(2, 2).asDiagonal().toDenseMatrix()) == doctest::Approx(2.0));

  GammaSet two({Eigen::Vector2d(1, 0.5).asDiagonal().toDenseMatrix(), Eigen::Vector2d(0.5, 1).asDiagonal().toDenseMatrix()});
  CHECK(g_value_matrix(two, Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix()) == doctest::Approx(0.25));

  GammaSet scaled({Eigen::MatrixXd::Identity(2, 2), 0.5 * Eigen::MatrixXd::Identity(2, 2)});
  CHECK(g_value_matrix(scaled, Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix()) == doctest::Approx(0.0));
}

TEST_CASE("matrix G reduces to scalar G in one dimension") {
  const GParams p = GParams::make(0.5, 1.0);
  const GammaSet gs = GammaSet::from_scalar(p);
  for (double a : {-3.0, -0.5, 0.0, 0.25, 4.0}) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = a;
    CHECK(g_value_matrix(gs, m) == doctest::Approx(g_value(p, a)));
  }
}

TEST_CASE("matrix G rejects malformed input") {
  GammaSet id({Eigen::MatrixXd::Identity(2, 2)});
  CHECK_THROWS_AS(g_value_matrix(id, Eigen::MatrixXd::Identity(3, 3)), InvalidArgument);
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_THROWS_AS(g_value_matrix(id, asym), InvalidArgument);
  CHECK_THROWS_AS(GammaSet({}), InvalidArgument);
  CHECK_THROWS_AS(GammaSet({-Eigen::MatrixXd::Identity(2, 2)}), InvalidArgument);
}

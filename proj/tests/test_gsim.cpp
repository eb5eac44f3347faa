#include "gbsde/error.hpp"
#include "gbsde/gsim.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>

using namespace gbsde;

namespace {

const GParams kParams = GParams::make(0.5, 1.0);

double terminal_variance(const PathEnsemble& ens) {
  double s = 0.0, s2 = 0.0;
  for (std::size_t p = 0; p < ens.n_paths; ++p) {
    const double b = ens.terminal_b(p);
    s += b;
    s2 += b * b;
  }
  const double n = static_cast<double>(ens.n_paths);
  return (s2 - s * s / n) / (n - 1.0);
}

}  // namespace

TEST_CASE("counter normals are a pure function with unit moments") {
  CHECK(counter_normal(3, 4, 5) == counter_normal(3, 4, 5));
  CHECK(counter_normal(3, 4, 5) != counter_normal(3, 4, 6));
  CHECK(counter_normal(3, 4, 5) != counter_normal(3, 5, 5));
  CHECK(counter_normal(3, 4, 5) != counter_normal(4, 4, 5));
  double m1 = 0, m2 = 0, m4 = 0;
  const int N = 400000;
  for (int k = 0; k < N; ++k) {
    const double z = counter_normal(1, k / 100, k % 100);
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  CHECK(std::abs(m1 / N) < 5.0 / std::sqrt(N));
  CHECK(std::abs(m2 / N - 1.0) < 5.0 * std::sqrt(2.0 / N));
  CHECK(std::abs(m4 / N - 3.0) < 5.0 * std::sqrt(96.0 / N));
}

TEST_CASE("control policies clamp into the variance interval") {
  CHECK(ControlPolicy::constant(0.7).variance(kParams, 0, 0) == 0.7);
  CHECK(ControlPolicy::constant(3.0).variance(kParams, 0, 0) == 1.0);
  const auto fb = ControlPolicy::feedback([](double, double x) { return x; }, "identity");
  CHECK(fb.variance(kParams, 0, -2.0) == 0.5);
  CHECK(fb.variance(kParams, 0, 0.8) == 0.8);
  CHECK(fb.label().find("identity") != std::string::npos);
}

TEST_CASE("terminal variance under the maximal control") {
  SimOptions opts;
  opts.record_stride = 0;
  const auto ens = simulate_paths(ControlPolicy::constant(1.0), kParams, 0, 1, 1e-2, 100000, 42, opts);
  CHECK(ens.n_records() == 2);
  CHECK(std::abs(terminal_variance(ens) - 1.0) <= 3.0 * std::sqrt(2.0 / 1e5));
}

TEST_CASE("quadratic variation is nondecreasing and inside the interval") {
  const auto fb = ControlPolicy::feedback([](double t, double b) { return 0.75 + 0.5 * std::sin(5 * b + t); }, "wiggle");
  const auto ens = simulate_paths(fb, kParams, 0.0, 0.5, 1e-2, 200, 3);
  CHECK(ens.n_records() == 51);
  for (std::size_t p = 0; p < ens.n_paths; ++p) {
    for (std::size_t r = 1; r < ens.n_records(); ++r) {
      const double dq = ens.QV[ens.at(p, r)] - ens.QV[ens.at(p, r - 1)];
      REQUIRE(dq >= 0.5 * 1e-2 * (1 - 1e-12));
      REQUIRE(dq <= 1.0 * 1e-2 * (1 + 1e-12));
    }
  }
}

TEST_CASE("ensembles are deterministic and independent of the thread count") {
  const auto run = [] { return simulate_paths(ControlPolicy::constant(0.8), kParams, 0, 1, 0.05, 301, 9); };
  ::setenv("GBSDE_THREADS", "1", 1);
  const auto a = run();
  ::setenv("GBSDE_THREADS", "4", 1);
  const auto b = run();
  ::unsetenv("GBSDE_THREADS");
  CHECK(a.B == b.B);
  CHECK(a.QV == b.QV);
  CHECK(ensemble_to_csv(a) == ensemble_to_csv(b));
  CHECK(ensemble_sidecar(a) == ensemble_sidecar(b));
  const auto c = simulate_paths(ControlPolicy::constant(0.8), kParams, 0, 1, 0.05, 301, 10);
  CHECK(a.B != c.B);
}

TEST_CASE("step size must divide the horizon") {
  CHECK_THROWS_AS(simulate_paths(ControlPolicy::constant(1), kParams, 0, 1, 0.3, 10, 1), InvalidArgument);
  CHECK_THROWS_AS(simulate_paths(ControlPolicy::constant(1), kParams, 0, 1, 0.0, 10, 1), InvalidArgument);
  CHECK_THROWS_AS(simulate_paths(ControlPolicy::constant(1), kParams, 0, 1, 0.1, 0, 1), InvalidArgument);
  CHECK_NOTHROW(simulate_paths(ControlPolicy::constant(1), kParams, 0.2, 1, 0.1, 10, 1));
}

TEST_CASE("Euler scheme on deterministic and pathwise identities") {
  auto ens = simulate_paths(ControlPolicy::constant(0.7), kParams, 0.25, 1.0, 0.05, 20, 5);
  CoefficientSet c;
  c.b = Expr::constant(1.0);
  c.sigma = Expr::constant(0.0);
  euler_forward(c, ens, 2.0, 0.25);
  for (std::size_t p = 0; p < ens.n_paths; ++p) CHECK(ens.terminal_x(p) == doctest::Approx(2.75).epsilon(1e-13));

  c = CoefficientSet{};
  euler_forward(c, ens, 1.0, 0.25);
  for (std::size_t p = 0; p < ens.n_paths; ++p)
    for (std::size_t r = 0; r < ens.n_records(); ++r)
      CHECK(ens.X[ens.at(p, r)] == doctest::Approx(1.0 + ens.B[ens.at(p, r)]).epsilon(1e-13));

  c.sigma = Expr::constant(0.0);
  c.h = Expr::constant(1.0);
  euler_forward(c, ens, 0.0, 0.25);
  for (std::size_t p = 0; p < ens.n_paths; ++p)
    CHECK(ens.terminal_x(p) == doctest::Approx(ens.QV[ens.at(p, ens.n_records() - 1)]).epsilon(1e-13));

  SimOptions ends;
  ends.record_stride = 0;
  auto sparse = simulate_paths(ControlPolicy::constant(0.7), kParams, 0, 1, 0.05, 5, 5, ends);
  CHECK_THROWS_AS(euler_forward(c, sparse, 0.0, 0.0), InvalidArgument);
}

TEST_CASE("joint forward simulation matches the Euler pass") {
  CoefficientSet c;
  c.b = parse("0.1*x");
  c.h = parse("-0.2");
  c.sigma = parse("1 + 0.1*x");
  SimOptions opts;
  opts.forward = &c;
  opts.x0 = 0.5;
  const auto joint = simulate_paths(ControlPolicy::constant(0.6), kParams, 0, 1, 0.01, 50, 8, opts);
  auto plain = simulate_paths(ControlPolicy::constant(0.6), kParams, 0, 1, 0.01, 50, 8);
  euler_forward(c, plain, 0.5, 0.0);
  REQUIRE(joint.X.size() == plain.X.size());
  for (std::size_t k = 0; k < joint.X.size(); ++k) CHECK(joint.X[k] == doctest::Approx(plain.X[k]).epsilon(1e-12));
}

TEST_CASE("Monte Carlo upper expectations under the extreme controls") {
  SimOptions opts;
  opts.record_stride = 0;
  std::vector<PathEnsemble> ens{
      simulate_paths(ControlPolicy::constant(0.5), kParams, 0, 1, 1e-2, 40000, 1, opts),
      simulate_paths(ControlPolicy::constant(1.0), kParams, 0, 1, 1e-2, 40000, 2, opts)};

  const auto sq = upper_expectation_mc(parse("x*x"), ens);
  CHECK(sq.argmax == 1);
  CHECK(std::abs(sq.value - 1.0) <= 4 * sq.se);
  CHECK(sq.per_policy.size() == 2);

  const auto nsq = upper_expectation_mc(parse("-x*x"), ens);
  CHECK(nsq.argmax == 0);
  CHECK(std::abs(nsq.value + 0.5) <= 4 * nsq.se);

  const auto lin = upper_expectation_mc(parse("x"), ens);
  for (const auto& pp : lin.per_policy) CHECK(std::abs(pp.mean) <= 3 * pp.se);
}

TEST_CASE("G-heat upper expectations") {
  CHECK(upper_expectation_pde(parse("x*x"), kParams, 1.0) == doctest::Approx(1.0).epsilon(5e-3));
  CHECK(upper_expectation_pde(parse("-x*x"), kParams, 1.0) == doctest::Approx(-0.5).epsilon(5e-3));
  CHECK(upper_expectation_pde(parse("pow(x,4)"), kParams, 1.0) == doctest::Approx(3.0).epsilon(2e-2 / 3));
  CHECK(std::abs(upper_expectation_pde(parse("x"), kParams, 1.0)) <= 1e-10);
}

TEST_CASE("ensemble CSV layout") {
  const auto ens = simulate_paths(ControlPolicy::constant(1.0), kParams, 0, 1, 0.5, 2, 1);
  const std::string csv = ensemble_to_csv(ens);
  CHECK(csv.rfind("# g-bsde-lab schema v1\npath,t,B,QV,X,control\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 2 + 2 * 3);
  CHECK(ensemble_sidecar(ens).find("\"seed\"") != std::string::npos);
}

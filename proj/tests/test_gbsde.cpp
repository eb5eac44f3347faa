#include "gbsde/error.hpp"
#include "gbsde/gbsde.hpp"

#include <doctest.h>

#include <cmath>

using namespace gbsde;

namespace {

PdeProblem problem(const char* phi, double T = 0.5) {
  PdeProblem p;
  p.coeffs.Phi = parse(phi);
  p.coeffs.growth_q = 2;
  p.gparams = GParams::make(0.5, 1.0);
  p.T = T;
  return p;
}

GridSpec small_grid(std::size_t nx = 121) {
  GridSpec g;
  g.x_min = -3;
  g.x_max = 3;
  g.nx = nx;
  return g;
}

ScalarGenerator abs_z(double c) { return ScalarGenerator{parse(std::to_string(c) + "*abs(z)"), 0.0, Modulus::linear(c, c), c}; }

}  // namespace

TEST_CASE("gap constant") {
  const GParams gp = GParams::make(0.5, 1.0);
  CHECK(gap_constant(1, gp, 0) == doctest::Approx(2.0));
  CHECK(gap_constant(1, gp, 1) == doctest::Approx(2 * std::exp(2.0)));
  CHECK(gap_constant(2, gp, 0) == doctest::Approx(1.0));
  CHECK(default_levels(2.5) == std::vector<double>{5, 10, 20, 40, 80});
}

TEST_CASE("ladder of a zero generator reproduces the G-heat solve") {
  const auto p = problem("x*x");
  const Ladder lad = approximation_ladder(p, {2.0, 4.0}, small_grid());
  const auto plain = solve(p, lad.grid);
  for (std::size_t k = 0; k < lad.levels.size(); ++k) {
    CHECK(lad.lower[k].max_core_diff(plain) <= 1e-12);
    CHECK(lad.upper[k].max_core_diff(plain) <= 1e-12);
    CHECK(lad.gap_report[k].gap <= 1e-12);
  }
  CHECK(lad.sandwich_ok);
  CHECK(lad.barrier_ok);
  CHECK(lad.all_pass());
  CHECK(lad.report_csv().rfind("# g-bsde-lab schema v1\n", 0) == 0);
}

TEST_CASE("ladder of an already Lipschitz generator collapses") {
  auto p = problem("x*x");
  p.f = abs_z(0.5);
  const Ladder lad = approximation_ladder(p, {2.0, 4.0}, small_grid());
  for (const auto& r : lad.gap_report) {
    CHECK(r.generator_gap > 0.0);
    CHECK(r.gap <= 2e-3);
    CHECK(r.pass);
  }
  CHECK(lad.sandwich_ok);
  CHECK_THROWS_AS(approximation_ladder(p, {0.5}, small_grid()), InvalidArgument);
}

TEST_CASE("ladder on a non-Lipschitz generator orders and shrinks") {
  auto p = problem("x*x", 0.2);
  p.f = ScalarGenerator{parse("-pow(abs(z),0.5)"), 0.0, Modulus::power(0.5, 1.0, 1.0), 1.0};
  const Ladder lad = approximation_ladder(p, {2.0, 4.0, 8.0}, small_grid());
  CHECK(lad.sandwich_ok);
  CHECK(lad.gaps_decreasing);
  for (const auto& r : lad.gap_report) CHECK(r.gap <= r.bound);
  CHECK(lad.barrier_ok);
}

TEST_CASE("exact solve") {
  auto p = problem("x*x");
  CHECK_THROWS_AS(solve_exact(p, small_grid(), 0.0), InvalidArgument);

  p.f = abs_z(0.5);
  const auto lvl = exact_level(p, 0.05);
  CHECK(lvl.first > 0.5);
  CHECK(lvl.second <= 0.05);
  const ExactSolution ex = solve_exact(p, small_grid(), 0.05);
  CHECK(ex.measured_gap <= 0.05 + 2 * ex.solver_tol);
  CHECK(ex.n > ex.L);
  CHECK(ex.solution.eval_u(0, 0) >= ex.barrier_lower.eval_u(0, 0) - 1e-9);
  CHECK(ex.solution.eval_u(0, 0) <= ex.barrier_upper.eval_u(0, 0) + 1e-9);
}

TEST_CASE("triple for constant terminal data") {
  const auto p = problem("1.5", 0.2);
  const auto sol = solve(p, build_grid(p, -3, 3, 121));
  SimOptions opts;
  opts.forward = &p.coeffs;
  opts.x0 = 0.3;
  const auto ens = simulate_paths(ControlPolicy::constant(0.7), p.gparams, 0, 0.2, 0.01, 50, 4, opts);
  const auto tri = extract_triple(sol, ens, p);
  for (std::size_t k = 0; k < tri.Y.size(); ++k) {
    CHECK(tri.Y[k] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(std::abs(tri.Z[k]) <= 1e-9);
    CHECK(std::abs(tri.K[k]) <= 1e-9);
  }
  const auto plain = simulate_paths(ControlPolicy::constant(0.7), p.gparams, 0, 0.2, 0.01, 5, 4);
  CHECK_THROWS_AS(extract_triple(sol, plain, p), InvalidArgument);
}

TEST_CASE("triple for the convex quadratic") {
  const auto p = problem("x*x", 0.5);
  const auto sol = solve(p, build_grid(p, -5, 5, 401));
  SimOptions opts;
  opts.forward = &p.coeffs;
  const auto ens = simulate_paths(ControlPolicy::constant(0.6), p.gparams, 0, 0.5, 1e-3, 100, 12, opts);
  const auto tri = extract_triple(sol, ens, p);
  std::vector<double> ref(tri.K.size());
  for (std::size_t path = 0; path < tri.n_paths; ++path) {
    for (std::size_t r = 0; r < tri.times.size(); ++r) {
      const std::size_t k = tri.at(path, r);
      const double b = ens.B[ens.at(path, r)];
      CHECK(tri.Y[k] == doctest::Approx(b * b + (0.5 - tri.times[r])).epsilon(1e-2));
      CHECK(tri.Z[k] == doctest::Approx(2 * b).scale(1.0).epsilon(1e-6));
      ref[k] = ens.QV[ens.at(path, r)] - tri.times[r];
    }
    CHECK(tri.K[tri.at(path, 0)] == 0.0);
  }
  const KCheck kc = check_k(tri, sol, ens, &ref);
  CHECK(kc.nonincreasing);
  CHECK(kc.matches_reference);
  for (std::size_t path = 0; path < tri.n_paths; ++path)
    CHECK(tri.K[tri.at(path, tri.times.size() - 1)] == doctest::Approx(-0.2).epsilon(0.1));

  SimOptions far = opts;
  far.x0 = 4.99;
  const auto edge = simulate_paths(ControlPolicy::constant(0.6), p.gparams, 0, 0.5, 1e-3, 3, 1, far);
  CHECK_THROWS_AS(extract_triple(sol, edge, p), InvalidArgument);
}

TEST_CASE("worst-case control") {
  for (const auto& [phi, q] : std::vector<std::pair<const char*, double>>{{"x*x", 1.0}, {"-x*x", 0.5}, {"2*x", 1.0}}) {
    const auto p = problem(phi, 0.2);
    const auto sol = solve(p, build_grid(p, -3, 3, 121));
    const ControlPolicy pol = worst_case_control(sol, p);
    for (double t : {0.0, 0.07, 0.19})
      for (double x : {-1.0, 0.0, 0.55}) CHECK(pol.variance(p.gparams, t, x) == q);
  }
}

TEST_CASE("worst-case control flattens K") {
  const auto p = problem("x*x", 0.5);
  const auto sol = solve(p, build_grid(p, -5, 5, 401));
  SimOptions opts;
  opts.forward = &p.coeffs;
  const auto ens = simulate_paths(worst_case_control(sol, p), p.gparams, 0, 0.5, 1e-3, 50, 2, opts);
  const KCheck kc = check_k(extract_triple(sol, ens, p), sol, ens);
  CHECK(kc.terminal_flat);
  CHECK(kc.nonincreasing);
}

TEST_CASE("comparison") {
  GridSpec g = small_grid(81);
  const auto base = problem("x*x", 0.3);

  const auto same = compare(base, base, g);
  CHECK(same.pass);
  CHECK(same.min_difference == 0.0);
  CHECK(same.max_difference == 0.0);

  auto bump = base;
  bump.f = ScalarGenerator::constant(1.0);
  const auto rb = compare(base, bump, g);
  CHECK(rb.pass);
  for (double t : {0.0, 0.1, 0.3})
    CHECK(rb.u2.eval_u(t, 0.4) - rb.u1.eval_u(t, 0.4) == doctest::Approx(0.3 - t).scale(1.0).epsilon(1e-9));

  auto shift = base;
  shift.coeffs.Phi = parse("x*x + 1");
  const auto rs = compare(base, shift, g);
  CHECK(rs.min_difference == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rs.max_difference == doctest::Approx(1.0).epsilon(1e-12));

  auto lower = base;
  lower.f = ScalarGenerator::constant(-0.1);
  CHECK_THROWS_AS(compare(base, lower, g), InvalidArgument);

  auto other_sigma = base;
  other_sigma.coeffs.sigma = parse("1.1");
  CHECK_THROWS_AS(compare(base, other_sigma, g), InvalidArgument);
}

#include "gbsde/gbsde.hpp"

#include "gbsde/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <sstream>

namespace gbsde {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

GridOptions grid_options(const GridSpec& spec) {
  GridOptions o;
  o.core_fraction = spec.core_fraction;
  o.max_stored_layers = spec.max_stored_layers;
  o.max_steps = spec.max_steps;
  return o;
}

// A grid on which every operator in `ops` is monotone.
SpaceTimeGrid shared_grid(const std::vector<const PdeOperator*>& ops, const GridSpec& spec) {
  const PdeOperator* worst = ops.front();
  double worst_rate = -1.0;
  for (const auto* op : ops) {
    const double r = monotonicity_rate(*op, spec.x_min, spec.x_max, spec.nx);
    if (r > worst_rate) {
      worst_rate = r;
      worst = op;
    }
  }
  return build_grid(*worst, spec.x_min, spec.x_max, spec.nx, grid_options(spec));
}

PdeOperator level_operator(const PdeProblem& problem, double n, bool upper,
                           const std::shared_ptr<const ZLattice>& lattice) {
  PdeOperator op;
  op.coeffs = problem.coeffs;
  op.gparams = problem.gparams;
  op.T = problem.T;
  op.f = upper ? Driver::upper_level(problem.f, n, lattice) : Driver::lower_level(problem.f, n, lattice);
  op.g = upper ? Driver::upper_level(problem.g, n, lattice) : Driver::lower_level(problem.g, n, lattice);
  return op;
}

PdeOperator barrier_operator(const PdeProblem& problem, double L, double sign,
                             const std::shared_ptr<const ZLattice>& lattice) {
  PdeOperator op;
  op.coeffs = problem.coeffs;
  op.gparams = problem.gparams;
  op.T = problem.T;
  op.f = Driver::barrier(problem.f, L, sign, lattice);
  op.g = Driver::barrier(problem.g, L, sign, lattice);
  return op;
}

// Largest value of (a - b) over core nodes of every stored layer.
double max_core_excess(const PdeSolution& a, const PdeSolution& b) {
  return 0.0 - a.min_core_excess(b);
}

bool depends_on_z(const PdeProblem& p) { return p.f.depends_on_z() || p.g.depends_on_z(); }

// Combined modulus max(phi_f, phi_g) over the z-dependent generators.
double combined_modulus(const PdeProblem& p, double r) {
  double v = 0.0;
  if (p.f.depends_on_z()) v = std::max(v, p.f.modulus_z(r));
  if (p.g.depends_on_z()) v = std::max(v, p.g.modulus_z(r));
  return v;
}

// Level from which the envelopes reproduce the generators: the largest
// declared linear modulus constant, or infinity when some modulus is not linear.
double coincidence_level(const PdeProblem& p) {
  double c = 0.0;
  for (const auto* gen : {&p.f, &p.g}) {
    if (!gen->depends_on_z()) continue;
    if (gen->modulus_z.kind != Modulus::Kind::Linear) return std::numeric_limits<double>::infinity();
    c = std::max(c, gen->modulus_z.c);
  }
  return c;
}

void check_levels(const std::vector<double>& levels, double L) {
  if (levels.empty()) throw InvalidArgument("ladder: at least one level is required");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (!(levels[k] > L)) {
      std::ostringstream os;
      os << "ladder: level n=" << levels[k] << " must exceed the growth constant L=" << L;
      throw InvalidArgument(os.str());
    }
    if (k > 0 && !(levels[k] > levels[k - 1])) throw InvalidArgument("ladder: levels must be strictly increasing");
  }
}

}  // namespace

double gap_constant(double L, const GParams& gp, double T) {
  if (!(L > 0.0)) throw InvalidArgument("gap_constant: L must be > 0");
  return 2.0 * std::exp(L * (1.0 + gp.sigma_high_sq) * T) / L;
}

double problem_growth(const PdeProblem& problem) { return std::max(problem.f.growth_L, problem.g.growth_L); }

std::vector<double> default_levels(double L) {
  if (!(L > 0.0)) throw InvalidArgument("default_levels: L must be > 0");
  return {2 * L, 4 * L, 8 * L, 16 * L, 32 * L};
}

// ---------------------------------------------------------------------------
// Ladder

bool Ladder::all_pass() const {
  bool ok = sandwich_ok && barrier_ok;
  for (const auto& r : gap_report) ok = ok && r.pass;
  return ok;
}

std::string Ladder::report_csv() const {
  std::string out = "# g-bsde-lab schema v1\nlevel,gap,bound,generator_gap,pass\n";
  for (const auto& r : gap_report) {
    out += num(r.n) + ',' + num(r.gap) + ',' + num(r.bound) + ',' + num(r.generator_gap) + ',' +
           (r.pass ? "pass" : "fail") + '\n';
  }
  return out;
}

Ladder approximation_ladder(const PdeProblem& problem, const std::vector<double>& levels, const GridSpec& spec,
                            const LadderOptions& options) {
  problem.validate();
  const double L = problem_growth(problem);
  check_levels(levels, L);

  Ladder lad;
  lad.levels = levels;
  lad.L = L;
  lad.solver_tol = options.solver_tol;
  lad.C_G = L > 0.0 ? gap_constant(L, problem.gparams, problem.T) : 0.0;

  auto lattice = make_lattice(problem, spec.x_min, spec.x_max, spec.nx, levels.front(), spec.lattice);
  std::vector<PdeOperator> ops;
  for (double n : levels) {
    ops.push_back(level_operator(problem, n, false, lattice));
    ops.push_back(level_operator(problem, n, true, lattice));
  }
  const bool barriers = options.barriers && L > 0.0;
  if (barriers) {
    ops.push_back(barrier_operator(problem, L, -1.0, lattice));
    ops.push_back(barrier_operator(problem, L, +1.0, lattice));
  }
  std::vector<const PdeOperator*> ptrs;
  for (const auto& op : ops) ptrs.push_back(&op);
  lad.grid = shared_grid(ptrs, spec);

  std::vector<std::optional<PdeSolution>> sols(ops.size());
  parallel_for(ops.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) sols[i].emplace(solve(ops[i], lad.grid));
  });
  for (std::size_t k = 0; k < levels.size(); ++k) {
    lad.lower.push_back(std::move(*sols[2 * k]));
    lad.upper.push_back(std::move(*sols[2 * k + 1]));
  }
  if (barriers) {
    lad.barrier_lower = std::move(sols[2 * levels.size()]);
    lad.barrier_upper = std::move(sols[2 * levels.size() + 1]);
  }

  const double tol = options.solver_tol;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    LevelReport r;
    r.n = levels[k];
    r.gap = lad.upper[k].max_core_diff(lad.lower[k]);
    if (depends_on_z(problem)) {
      r.generator_gap = combined_modulus(problem, 2.0 * L / (r.n - L));
      r.bound = (r.n >= coincidence_level(problem) ? 0.0 : lad.C_G * r.generator_gap) + 2.0 * tol;
    } else {
      r.bound = 2.0 * tol;
    }
    r.pass = r.gap <= r.bound;
    lad.gap_report.push_back(r);
  }

  double viol = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (k + 1 < levels.size()) {
      viol = std::max(viol, max_core_excess(lad.lower[k], lad.lower[k + 1]));
      viol = std::max(viol, max_core_excess(lad.upper[k + 1], lad.upper[k]));
    }
    for (std::size_t m = 0; m < levels.size(); ++m) viol = std::max(viol, max_core_excess(lad.lower[k], lad.upper[m]));
  }
  lad.sandwich_violation = viol;
  lad.sandwich_ok = viol <= tol;

  lad.gaps_decreasing = true;
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    const double a = lad.gap_report[k].gap, b = lad.gap_report[k + 1].gap;
    const bool both_zero = a <= 1e-12 && b <= 1e-12;
    if (!(b < a) && !both_zero) lad.gaps_decreasing = false;
  }

  if (barriers) {
    double bv = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < levels.size(); ++k) {
      bv = std::max(bv, max_core_excess(*lad.barrier_lower, lad.lower[k]));
      bv = std::max(bv, max_core_excess(lad.upper[k], *lad.barrier_upper));
    }
    lad.barrier_violation = bv;
    lad.barrier_ok = bv <= tol;
  }
  return lad;
}

// ---------------------------------------------------------------------------
// Exact solve

std::pair<double, double> exact_level(const PdeProblem& problem, double target, double max_level) {
  if (!(target > 0.0) || !std::isfinite(target)) {
    throw InvalidArgument("solve_exact: target gap must be positive and finite");
  }
  const double L = problem_growth(problem);
  const double first = std::floor(L) + 1.0;
  if (!depends_on_z(problem)) return {first, 0.0};
  if (!(L > 0.0)) throw InvalidArgument("solve_exact: a z-dependent generator needs a positive growth constant");
  const double C = gap_constant(L, problem.gparams, problem.T);
  const double coincide = std::max(first, std::ceil(coincidence_level(problem)));
  auto predicted = [&](double n) { return n >= coincide ? 0.0 : C * combined_modulus(problem, 2.0 * L / (n - L)); };
  auto ok = [&](double n) { return predicted(n) <= target; };

  double hi = first;
  while (!ok(hi)) {
    if (hi > max_level) {
      std::ostringstream os;
      os << "solve_exact: target gap " << target << " needs an envelope level above " << max_level
         << "; raise the target or shorten the horizon";
      throw SolverError(os.str());
    }
    hi = std::max(hi * 2.0, first + 1.0);
  }
  double lo = first - 1.0;  // invariant: ok(hi), !ok(lo) or lo below the admissible range
  while (hi - lo > 1.0) {
    const double mid = std::floor(0.5 * (lo + hi));
    if (mid >= first && ok(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {hi, predicted(hi)};
}

ExactSolution solve_exact(const PdeProblem& problem, const GridSpec& spec, double target,
                          const ExactOptions& options) {
  problem.validate();
  auto [n, predicted] = exact_level(problem, target, options.max_level);
  const double L = problem_growth(problem);
  if (options.force_level > 0.0) {
    check_levels({options.force_level}, L);
    n = options.force_level;
    predicted = depends_on_z(problem) ? gap_constant(L, problem.gparams, problem.T) *
                                            combined_modulus(problem, 2.0 * L / (n - L))
                                      : 0.0;
  }
  const double Lb = L > 0.0 ? L : 0.0;

  auto lattice = make_lattice(problem, spec.x_min, spec.x_max, spec.nx, n, spec.lattice);
  std::vector<PdeOperator> ops{level_operator(problem, n, false, lattice), level_operator(problem, n, true, lattice),
                               barrier_operator(problem, Lb, -1.0, lattice),
                               barrier_operator(problem, Lb, +1.0, lattice)};
  std::vector<const PdeOperator*> ptrs;
  for (const auto& op : ops) ptrs.push_back(&op);
  const SpaceTimeGrid grid = shared_grid(ptrs, spec);

  std::vector<std::optional<PdeSolution>> sols(ops.size());
  parallel_for(ops.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) sols[i].emplace(solve(ops[i], grid));
  });

  ExactSolution out{.solution = std::move(*sols[0]),
                    .upper = std::move(*sols[1]),
                    .barrier_lower = std::move(*sols[2]),
                    .barrier_upper = std::move(*sols[3])};
  out.n = n;
  out.L = L;
  out.C_G = L > 0.0 ? gap_constant(L, problem.gparams, problem.T) : 0.0;
  out.predicted_gap = predicted;
  out.measured_gap = out.upper.max_core_diff(out.solution);
  out.target = target;
  out.solver_tol = options.solver_tol;
  if (out.measured_gap > target + 2.0 * options.solver_tol) {
    std::ostringstream os;
    os << "solve_exact: measured core gap " << out.measured_gap << " at level n=" << n << " exceeds target "
       << target << " + 2*" << options.solver_tol << "; refine the grid";
    throw SolverError(os.str());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Paths

SolutionTriple extract_triple(const PdeSolution& sol, const PathEnsemble& ens, const PdeProblem& problem) {
  if (!ens.has_x()) throw InvalidArgument("extract_triple: ensemble has no forward paths X");
  const auto& grid = sol.grid();
  if (ens.t0 < sol.times().front() - 1e-12 || ens.times.back() > sol.times().back() + 1e-12) {
    throw InvalidArgument("extract_triple: ensemble times fall outside the solution");
  }
  SolutionTriple tr;
  tr.n_paths = ens.n_paths;
  tr.times = ens.times;
  const std::size_t nr = ens.n_records();
  tr.Y.assign(ens.n_paths * nr, 0.0);
  tr.Z.assign(ens.n_paths * nr, 0.0);
  tr.K.assign(ens.n_paths * nr, 0.0);
  const auto& c = problem.coeffs;

  parallel_for(ens.n_paths, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      for (std::size_t r = 0; r < nr; ++r) {
        const std::size_t i = ens.at(p, r);
        const double t = ens.times[r], x = ens.X[i];
        if (x - grid.dx() < grid.x_min || x + grid.dx() > grid.x_max) {
          std::ostringstream os;
          os << "extract_triple: path " << p << " reaches x=" << x << " at t=" << t
             << ", within one grid spacing of the boundary; pad the domain";
          throw InvalidArgument(os.str());
        }
        tr.Y[i] = sol.eval_u(t, x);
        tr.Z[i] = c.sigma(Env{t, x, 0, 0}) * sol.grad_x(t, x);
      }
      double drift = 0.0, mart = 0.0;
      const double y0 = tr.Y[ens.at(p, 0)];
      for (std::size_t r = 0; r + 1 < nr; ++r) {
        const std::size_t i = ens.at(p, r), j = ens.at(p, r + 1);
        const double t = ens.times[r], x = ens.X[i], y = tr.Y[i], z = tr.Z[i];
        const double dt = ens.times[r + 1] - t;
        drift += problem.f(t, x, y, z) * dt + problem.g(t, x, y, z) * (ens.QV[j] - ens.QV[i]);
        mart += z * (ens.B[j] - ens.B[i]);
        tr.K[j] = tr.Y[j] - y0 + drift - mart;
      }
    }
  });
  return tr;
}

namespace {

struct HamiltonianTable {
  std::vector<double> times;
  std::vector<std::vector<double>> H;
  double x_min, dx;
  std::size_t nx;

  double operator()(double t, double x) const {
    t = std::clamp(t, times.front(), times.back());
    std::size_t k = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    k = std::clamp<std::size_t>(k, 1, times.size() - 1) - 1;
    const double s = std::clamp((x - x_min) / dx, 0.0, static_cast<double>(nx - 1));
    std::size_t i = std::min(static_cast<std::size_t>(s), nx - 2);
    const double w = s - static_cast<double>(i);
    auto at = [&](std::size_t layer) { return H[layer][i] + w * (H[layer][i + 1] - H[layer][i]); };
    if (times.size() == 1) return at(0);
    const double wt = (t - times[k]) / (times[k + 1] - times[k]);
    return at(k) + wt * (at(k + 1) - at(k));
  }
};

}  // namespace

ControlPolicy worst_case_control(const PdeSolution& sol, const PdeProblem& problem) {
  auto table = std::make_shared<HamiltonianTable>();
  const auto& grid = sol.grid();
  table->times = sol.times();
  table->x_min = grid.x_min;
  table->dx = grid.dx();
  table->nx = grid.nx;
  const auto& c = problem.coeffs;
  const double dx = grid.dx();
  for (std::size_t k = 0; k < sol.times().size(); ++k) {
    const auto& u = sol.layers()[k];
    const double t = sol.times()[k];
    std::vector<double> H(grid.nx, 0.0);
    for (std::size_t i = 1; i + 1 < grid.nx; ++i) {
      const double x = grid.x(i);
      const Env env{t, x, 0, 0};
      const double s = c.sigma(env);
      const double d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
      const double pc = (u[i + 1] - u[i - 1]) / (2.0 * dx);
      H[i] = s * s * d2 + 2.0 * c.h(env) * pc + 2.0 * problem.g(t, x, u[i], s * pc);
    }
    H.front() = H[1];
    H.back() = H[grid.nx - 2];
    table->H.push_back(std::move(H));
  }
  const GParams gp = problem.gparams;
  return ControlPolicy::feedback(
      [table, gp](double t, double x) { return worst_case_q(gp, (*table)(t, x)); }, "worst-case " + sol.fingerprint());
}

KCheck check_k(const SolutionTriple& triple, const PdeSolution& sol, const PathEnsemble& ens,
               const std::vector<double>* reference) {
  double step = 0.0;
  for (std::size_t r = 0; r + 1 < triple.times.size(); ++r) step = std::max(step, triple.times[r + 1] - triple.times[r]);
  KCheck out;
  out.tolerance_factor = 5.0 * (sol.grid().dx() + std::sqrt(step));
  const std::size_t nr = triple.times.size();
  if (reference && reference->size() != triple.K.size()) throw InvalidArgument("check_k: reference size mismatch");
  for (std::size_t p = 0; p < triple.n_paths; ++p) {
    double scale = 0.0;
    for (std::size_t r = 0; r < nr; ++r) scale = std::max(scale, std::abs(triple.Y[triple.at(p, r)]));
    scale += 1.0;
    for (std::size_t r = 0; r + 1 < nr; ++r) {
      const double inc = triple.K[triple.at(p, r + 1)] - triple.K[triple.at(p, r)];
      out.max_increase = std::max(out.max_increase, inc / scale);
    }
    out.max_terminal = std::max(out.max_terminal, std::abs(triple.K[triple.at(p, nr - 1)]) / scale);
    if (reference) {
      for (std::size_t r = 0; r < nr; ++r) {
        const std::size_t i = triple.at(p, r);
        out.max_reference_error = std::max(out.max_reference_error, std::abs(triple.K[i] - (*reference)[i]) / scale);
      }
    }
  }
  (void)ens;
  out.nonincreasing = out.max_increase <= out.tolerance_factor;
  out.terminal_flat = out.max_terminal <= out.tolerance_factor;
  out.matches_reference = out.max_reference_error <= out.tolerance_factor;
  return out;
}

// ---------------------------------------------------------------------------
// Comparison

std::string ComparisonReport::report_csv() const {
  std::string out = "# g-bsde-lab schema v1\nt,x,u1,u2,difference\n";
  const auto& g = u1.grid();
  for (std::size_t k = 0; k < u1.times().size(); ++k) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      if (!g.in_core(g.x(i))) continue;
      const double a = u1.layers()[k][i], b = u2.layers()[k][i];
      out += num(u1.times()[k]) + ',' + num(g.x(i)) + ',' + num(a) + ',' + num(b) + ',' + num(b - a) + '\n';
    }
  }
  return out;
}

namespace {

void check_hypotheses(const PdeProblem& p1, const PdeProblem& p2, const GridSpec& spec) {
  const auto& a = p1.coeffs;
  const auto& b = p2.coeffs;
  if (!a.b.structurally_equal(b.b) || !a.h.structurally_equal(b.h) || !a.sigma.structurally_equal(b.sigma)) {
    throw InvalidArgument("compare: problems must share the coefficients b, h and sigma");
  }
  if (!(p1.gparams == p2.gparams) || p1.T != p2.T) throw InvalidArgument("compare: problems must share G and T");
  const double dx = (spec.x_max - spec.x_min) / static_cast<double>(spec.nx - 1);
  auto witness = [](const char* what, double t, double x, double y, double z, double lhs, double rhs) {
    std::ostringstream os;
    os << "compare: hypothesis " << what << " fails at t=" << t << ", x=" << x << ", y=" << y << ", z=" << z << " ("
       << lhs << " > " << rhs << ")";
    throw InvalidArgument(os.str());
  };
  const double slack = 1e-12;
  for (std::size_t i = 0; i < spec.nx; ++i) {
    const double x = spec.x_min + dx * static_cast<double>(i);
    const double f1 = a.Phi(Env{p1.T, x, 0, 0}), f2 = b.Phi(Env{p1.T, x, 0, 0});
    if (f1 > f2 + slack * (1.0 + std::abs(f2))) witness("Phi1 <= Phi2", p1.T, x, 0, 0, f1, f2);
    for (double t : {0.0, 0.5 * p1.T, p1.T}) {
      for (double y : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
        for (double z : {-5.0, -1.0, -0.1, 0.0, 0.1, 1.0, 5.0}) {
          const double a1 = p1.f(t, x, y, z), a2 = p2.f(t, x, y, z);
          if (a1 > a2 + slack * (1.0 + std::abs(a2))) witness("f1 <= f2", t, x, y, z, a1, a2);
          const double g1 = p1.g(t, x, y, z), g2 = p2.g(t, x, y, z);
          if (g1 > g2 + slack * (1.0 + std::abs(g2))) witness("g1 <= g2", t, x, y, z, g1, g2);
        }
      }
    }
  }
}

}  // namespace

ComparisonReport compare(const PdeProblem& p1, const PdeProblem& p2, const GridSpec& spec, double target,
                         const ExactOptions& options) {
  p1.validate();
  p2.validate();
  check_hypotheses(p1, p2, spec);
  double n = options.force_level;
  if (n <= 0.0) {
    n = std::max(exact_level(p1, target, options.max_level).first, exact_level(p2, target, options.max_level).first);
  }
  check_levels({n}, std::max(problem_growth(p1), problem_growth(p2)));
  auto lat1 = make_lattice(p1, spec.x_min, spec.x_max, spec.nx, n, spec.lattice);
  auto lat2 = make_lattice(p2, spec.x_min, spec.x_max, spec.nx, n, spec.lattice);
  auto lattice = lat1->z_max() >= lat2->z_max() ? lat1 : lat2;
  std::vector<PdeOperator> ops{level_operator(p1, n, false, lattice), level_operator(p1, n, true, lattice),
                               level_operator(p2, n, false, lattice), level_operator(p2, n, true, lattice)};
  std::vector<const PdeOperator*> ptrs;
  for (const auto& op : ops) ptrs.push_back(&op);
  const SpaceTimeGrid grid = shared_grid(ptrs, spec);
  std::vector<std::optional<PdeSolution>> sols(ops.size());
  parallel_for(ops.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) sols[i].emplace(solve(ops[i], grid));
  });

  ComparisonReport rep{.u1 = *sols[0], .u2 = *sols[2]};
  rep.n = n;
  rep.gap1 = sols[1]->max_core_diff(*sols[0]);
  rep.gap2 = sols[3]->max_core_diff(*sols[2]);
  rep.min_difference = rep.u1.min_core_excess(rep.u2);
  rep.max_difference = 0.0 - rep.u2.min_core_excess(rep.u1);
  rep.tolerance = rep.gap1 + rep.gap2 + 2.0 * options.solver_tol;
  rep.pass = rep.min_difference >= -rep.tolerance;
  return rep;
}

}  // namespace gbsde

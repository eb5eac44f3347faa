#include "gbsde/cli.hpp"

#include "gbsde/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace gbsde {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config reading with JSON-pointer diagnostics

class Node {
 public:
  Node(const json* value, std::string pointer) : value_(value), pointer_(std::move(pointer)) {}

  bool has(const char* key) const { return value_->is_object() && value_->contains(key); }
  std::string at_ptr(const char* key) const { return pointer_ + "/" + key; }
  const std::string& pointer() const { return pointer_; }
  const json& raw() const { return *value_; }

  Node child(const char* key) const {
    if (!has(key)) throw ConfigError(at_ptr(key), "required field is missing");
    return Node(&(*value_)[key], at_ptr(key));
  }

  Node object(const char* key) const {
    Node c = child(key);
    if (!c.raw().is_object()) throw ConfigError(c.pointer(), "expected an object");
    return c;
  }

  double number(const char* key) const {
    Node c = child(key);
    if (!c.raw().is_number()) throw ConfigError(c.pointer(), "expected a number");
    const double v = c.raw().get<double>();
    if (!std::isfinite(v)) throw ConfigError(c.pointer(), "expected a finite number");
    return v;
  }
  double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::size_t count(const char* key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    Node c = child(key);
    if (!c.raw().is_number_unsigned() && !(c.raw().is_number_integer() && c.raw().get<long long>() >= 0)) {
      throw ConfigError(c.pointer(), "expected a nonnegative integer");
    }
    return c.raw().get<std::size_t>();
  }

  std::string text(const char* key) const {
    Node c = child(key);
    if (!c.raw().is_string()) throw ConfigError(c.pointer(), "expected a string");
    return c.raw().get<std::string>();
  }
  std::string text(const char* key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }

 private:
  const json* value_;
  std::string pointer_;
};

Expr expression(const Node& node, const char* key, const std::string& fallback, const ConstantTable& constants) {
  const std::string src = node.text(key, fallback);
  try {
    return parse(src, constants);
  } catch (const ParseError& e) {
    throw ConfigError(node.at_ptr(key), e.what());
  }
}

Modulus read_modulus(const Node& node) {
  if (!node.raw().is_object()) throw ConfigError(node.pointer(), "expected an object");
  const std::string kind = node.text("kind");
  Modulus m;
  try {
    if (kind == "power") {
      m = Modulus::power(node.number("alpha"), node.number("c"), node.number("growth_L"));
    } else if (kind == "linear") {
      m = Modulus::linear(node.number("c"), node.number("growth_L"));
    } else if (kind == "tabulated") {
      Node pts = node.child("points");
      if (!pts.raw().is_array()) throw ConfigError(pts.pointer(), "expected an array of [r, phi] pairs");
      std::vector<std::pair<double, double>> table;
      for (std::size_t i = 0; i < pts.raw().size(); ++i) {
        const auto& p = pts.raw()[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
          throw ConfigError(pts.pointer() + "/" + std::to_string(i), "expected [r, phi]");
        }
        table.emplace_back(p[0].get<double>(), p[1].get<double>());
      }
      m = Modulus::tabulated(std::move(table), node.number("growth_L"));
    } else {
      throw ConfigError(node.at_ptr("kind"), "unknown modulus kind '" + kind + "' (power, linear, tabulated)");
    }
    m.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(node.pointer(), e.what());
  }
  return m;
}

ScalarGenerator read_generator(const Node& parent, const char* key, const ConstantTable& constants) {
  ScalarGenerator gen = ScalarGenerator::constant(0.0);
  if (!parent.has(key)) return gen;
  Node node = parent.child(key);
  if (node.raw().is_string()) {
    gen.body = expression(parent, key, "0", constants);
    return gen;
  }
  if (!node.raw().is_object()) throw ConfigError(node.pointer(), "expected an expression string or an object");
  gen.body = expression(node, "expr", "0", constants);
  gen.lip_y = node.number("lip_y", 0.0);
  gen.growth_L = node.number("growth_L", 0.0);
  if (node.has("modulus")) {
    gen.modulus_z = read_modulus(node.child("modulus"));
  } else {
    gen.modulus_z = Modulus::linear(0.0, gen.growth_L);
  }
  if (gen.lip_y < 0.0) throw ConfigError(node.at_ptr("lip_y"), "must be >= 0");
  if (gen.growth_L < 0.0) throw ConfigError(node.at_ptr("growth_L"), "must be >= 0");
  return gen;
}

PdeProblem read_problem(const Node& node, const GParams& gp, const ConstantTable& constants, const GridSpec& grid) {
  PdeProblem p;
  p.gparams = gp;
  p.T = node.number("T", 1.0);
  if (!(p.T > 0.0)) throw ConfigError(node.at_ptr("T"), "must be > 0");
  p.coeffs.Phi = expression(node, "Phi", "", constants);
  p.coeffs.b = expression(node, "b", "0", constants);
  p.coeffs.h = expression(node, "h", "0", constants);
  p.coeffs.sigma = expression(node, "sigma", "1", constants);
  p.coeffs.growth_q = static_cast<int>(node.count("growth_q", 2));
  p.f = read_generator(node, "f", constants);
  p.g = read_generator(node, "g", constants);
  p.lip_z_bound = node.number("lip_z_bound", 0.0);

  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(node.pointer(), e.what());
  }
  // Omitted lip_const is fitted on the check panel, so only declared
  // constants can fail.
  if (node.has("lip_const")) {
    p.coeffs.lip_const = node.number("lip_const", 1.0);
  } else {
    p.coeffs.lip_const = std::max(1.0, p.coeffs.fitted_lip_const(grid.x_min, grid.x_max, p.T));
  }
  try {
    p.coeffs.check(grid.x_min, grid.x_max, p.T);
  } catch (const Error& e) {
    throw ConfigError(node.pointer(), e.what());
  }
  for (const char* key : {"f", "g"}) {
    const ScalarGenerator& gen = key[0] == 'f' ? p.f : p.g;
    try {
      gen.check_metadata(grid.x_min, grid.x_max, p.T);
    } catch (const Error& e) {
      throw ConfigError(node.at_ptr(key), e.what());
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Outputs

class Summary {
 public:
  explicit Summary(std::string experiment) { doc_["experiment"] = std::move(experiment); }

  void check(const std::string& name, double value, double bound, bool pass, const char* relation = "<=") {
    ojson c;
    c["name"] = name;
    c["value"] = value;
    c["relation"] = relation;
    c["bound"] = bound;
    c["pass"] = pass;
    checks_.push_back(std::move(c));
    all_ &= pass;
  }

  ojson& data() { return data_; }
  bool pass() const { return all_; }

  std::string dump() const {
    ojson out = doc_;
    out["data"] = data_;
    out["checks"] = checks_;
    out["pass"] = all_;
    return out.dump(2) + "\n";
  }

  void set(const std::string& key, ojson v) { doc_[key] = std::move(v); }

 private:
  ojson doc_;
  ojson data_ = ojson::object();
  ojson checks_ = ojson::array();
  bool all_ = true;
};

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ojson grid_json(const SpaceTimeGrid& g) {
  ojson j;
  j["x_min"] = g.x_min;
  j["x_max"] = g.x_max;
  j["nx"] = g.nx;
  j["dx"] = g.dx();
  j["nt"] = g.nt;
  j["dt"] = g.dt;
  j["core"] = {g.core_lo(), g.core_hi()};
  return j;
}

std::vector<double> levels_for(const RunConfig& cfg, const PdeProblem& p) {
  if (!cfg.levels.empty()) return cfg.levels;
  const double L = problem_growth(p);
  if (!(L > 0.0)) throw InvalidArgument("ladder: the problem has growth constant 0; list levels explicitly");
  return default_levels(L);
}

ExactOptions exact_options(const RunConfig& cfg) {
  ExactOptions o;
  o.solver_tol = cfg.solver_tol;
  return o;
}

// Largest |u - reference| over stored layers and core nodes.
double reference_error(const PdeSolution& sol, const Expr& ref) {
  const auto& g = sol.grid();
  double worst = 0.0;
  for (std::size_t k = 0; k < sol.times().size(); ++k) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      if (!g.in_core(g.x(i))) continue;
      worst = std::max(worst, std::abs(sol.layers()[k][i] - ref(Env{sol.times()[k], g.x(i), 0, 0})));
    }
  }
  return worst;
}

// Max of (lower - u) and (u - upper) over core nodes at t = 0.
double barrier_excess(const PdeSolution& u, const PdeSolution& lower, const PdeSolution& upper) {
  const auto& g = u.grid();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.nx; ++i) {
    if (!g.in_core(g.x(i))) continue;
    worst = std::max(worst, lower.initial()[i] - u.initial()[i]);
    worst = std::max(worst, u.initial()[i] - upper.initial()[i]);
  }
  return worst;
}

ControlPolicy make_policy(const std::string& name, const GParams& gp, const PdeSolution* sol,
                          const PdeProblem& problem) {
  if (name == "low") return ControlPolicy::constant(gp.sigma_low_sq);
  if (name == "high") return ControlPolicy::constant(gp.sigma_high_sq);
  if (name == "feedback") {
    if (!sol) throw InvalidArgument("feedback policy needs a PDE solution");
    return worst_case_control(*sol, problem);
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(name, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != name.size()) throw InvalidArgument("unknown policy '" + name + "' (low, high, feedback or a variance)");
  if (v < gp.sigma_low_sq || v > gp.sigma_high_sq) {
    throw InvalidArgument("policy variance " + name + " lies outside [sigma_low_sq, sigma_high_sq]");
  }
  return ControlPolicy::constant(v);
}

// ---------------------------------------------------------------------------
// Experiments

void run_upper_expectation(const RunConfig& cfg, Summary& s, const std::filesystem::path& out) {
  const auto& p = cfg.problem;
  PdeProblem heat;
  heat.coeffs.Phi = p.coeffs.Phi;
  heat.gparams = p.gparams;
  heat.T = p.T;
  const SpaceTimeGrid grid = build_grid(heat, cfg.grid.x_min, cfg.grid.x_max, cfg.grid.nx);
  const PdeSolution sol = solve(heat, grid);
  const double pde = sol.eval_u(0.0, 0.0);

  std::vector<PathEnsemble> ensembles;
  SimOptions opts;
  opts.record_stride = 0;
  for (const auto& name : cfg.mc.policies) {
    const ControlPolicy pol = make_policy(name, p.gparams, &sol, heat);
    ensembles.push_back(simulate_paths(pol, p.gparams, 0.0, p.T, cfg.mc.dt, cfg.mc.n_paths, cfg.mc.seed, opts));
  }
  const UpperExpectation mc = upper_expectation_mc(p.coeffs.Phi, ensembles);

  std::string csv = "# g-bsde-lab schema v1\npolicy,mean,se,pde,bound,pass\n";
  s.data()["pde_value"] = pde;
  s.data()["grid"] = grid_json(grid);
  s.data()["mc_value"] = mc.value;
  s.data()["mc_se"] = mc.se;
  for (std::size_t i = 0; i < mc.per_policy.size(); ++i) {
    const auto& e = mc.per_policy[i];
    const std::string& name = cfg.mc.policies[i];
    const double bound = pde + cfg.mc.se_multiplier * e.se + cfg.mc.dominance_slack;
    const bool ok = e.mean <= bound;
    s.check("dominance " + name, e.mean, bound, ok);
    if (name == "feedback") {
      const double dev = std::abs(e.mean - pde);
      s.check("feedback attains " + name, dev, cfg.mc.se_multiplier * e.se + cfg.mc.feedback_slack,
              dev <= cfg.mc.se_multiplier * e.se + cfg.mc.feedback_slack);
    }
    csv += name + ',' + num(e.mean) + ',' + num(e.se) + ',' + num(pde) + ',' + num(bound) + ',' +
           (ok ? "pass" : "fail") + '\n';
  }
  write_file(out / "upper_expectation.csv", csv);
  write_file(out / "paths_sidecar.json", ensemble_sidecar(ensembles.front()));
}

void run_envelope_report(const RunConfig& cfg, Summary& s, const std::filesystem::path& out) {
  const auto& p = cfg.problem;
  std::string csv =
      "# g-bsde-lab schema v1\ngenerator,n,t,x,y,z,value,lower,upper,gap_bound,grid_error,pass\n";
  std::mt19937_64 rng(cfg.mc.seed);
  std::uniform_real_distribution<double> ut(0.0, p.T), ux(cfg.grid.x_min, cfg.grid.x_max), uy(-2.0, 2.0),
      uz(-5.0, 5.0);
  bool any = false;
  for (const char* name : {"f", "g"}) {
    const ScalarGenerator& gen = name[0] == 'f' ? p.f : p.g;
    if (!gen.depends_on_z()) continue;
    any = true;
    const double L = gen.growth_L;
    std::vector<double> levels = cfg.levels.empty() ? std::vector<double>{2 * L, 4 * L, 8 * L} : cfg.levels;
    double worst_sandwich = -std::numeric_limits<double>::infinity();
    double worst_gap = -std::numeric_limits<double>::infinity();
    double worst_mono = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cfg.envelope_samples; ++k) {
      const double t = ut(rng), x = ux(rng), y = uy(rng), z = uz(rng);
      const double v = gen(t, x, y, z), v0 = gen(t, x, 0.0, 0.0);
      const double w = L * (1.0 + std::abs(y) + std::abs(z));
      double prev_lo = -std::numeric_limits<double>::infinity();
      double prev_up = std::numeric_limits<double>::infinity();
      double prev_err = 0.0;
      for (double n : levels) {
        const double R = search_radius(L, n, y, z);
        const double step = default_envelope_step(R);
        const double err = envelope_grid_error(gen.modulus_z, n, step);
        const double lo = lower_envelope(gen, n, t, x, y, z, step);
        const double up = upper_envelope(gen, n, t, x, y, z, step);
        const double bound = envelope_gap_bound(gen.modulus_z, L, n);
        const double slack = 1e-12 * (1.0 + std::abs(v));
        const double sw = std::max({v0 - w - lo, lo - v, v - up, up - (v0 + w)}) - slack;
        const double gp = std::max(v - lo - bound - err, up - v - bound - err) - slack;
        const double mono = std::max(prev_lo - lo - prev_err, up - prev_up - prev_err) - slack;
        worst_sandwich = std::max(worst_sandwich, sw);
        worst_gap = std::max(worst_gap, gp);
        worst_mono = std::max(worst_mono, mono);
        csv += std::string(name) + ',' + num(n) + ',' + num(t) + ',' + num(x) + ',' + num(y) + ',' + num(z) + ',' +
               num(v) + ',' + num(lo) + ',' + num(up) + ',' + num(bound) + ',' + num(err) + ',' +
               (sw <= 0 && gp <= 0 && mono <= 0 ? "pass" : "fail") + '\n';
        prev_lo = lo;
        prev_up = up;
        prev_err = err;
      }
    }
    s.check(std::string(name) + " sandwich excess", worst_sandwich, 0.0, worst_sandwich <= 0.0);
    s.check(std::string(name) + " gap excess", worst_gap, 0.0, worst_gap <= 0.0);
    s.check(std::string(name) + " level monotonicity excess", worst_mono, 0.0, worst_mono <= 0.0);
  }
  s.data()["z_dependent_generators"] = any;
  write_file(out / "envelope.csv", csv);
}

void record_ladder(const Ladder& lad, Summary& s, const std::filesystem::path& out) {
  ojson rows = ojson::array();
  for (const auto& r : lad.gap_report) {
    ojson row;
    row["n"] = r.n;
    row["gap"] = r.gap;
    row["bound"] = r.bound;
    rows.push_back(row);
    s.check("ladder gap n=" + num(r.n), r.gap, r.bound, r.pass);
  }
  s.data()["ladder"] = rows;
  s.data()["ladder_C_G"] = lad.C_G;
  s.data()["ladder_grid"] = grid_json(lad.grid);
  s.check("ladder sandwich violation", lad.sandwich_violation, lad.solver_tol, lad.sandwich_ok);
  if (lad.barrier_lower) s.check("ladder barrier violation", lad.barrier_violation, lad.solver_tol, lad.barrier_ok);
  if (lad.levels.size() > 1) {
    s.check("ladder gaps decreasing", lad.gaps_decreasing ? 1.0 : 0.0, 1.0, lad.gaps_decreasing, "==");
  }
  write_file(out / "ladder.csv", lad.report_csv());
}

void run_ladder(const RunConfig& cfg, Summary& s, const std::filesystem::path& out) {
  LadderOptions lo;
  lo.solver_tol = cfg.solver_tol;
  const Ladder lad = approximation_ladder(cfg.problem, levels_for(cfg, cfg.problem), cfg.grid, lo);
  record_ladder(lad, s, out);
}

void record_exact(const ExactSolution& ex, Summary& s) {
  s.data()["level"] = ex.n;
  s.data()["L"] = ex.L;
  s.data()["C_G"] = ex.C_G;
  s.data()["predicted_gap"] = ex.predicted_gap;
  s.data()["measured_gap"] = ex.measured_gap;
  s.data()["grid"] = grid_json(ex.solution.grid());
  s.data()["fingerprint"] = ex.solution.fingerprint();
  const double mid = 0.5 * (ex.solution.grid().x_min + ex.solution.grid().x_max);
  s.data()["u0_center"] = ex.solution.eval_u(0.0, mid);
  s.check("measured gap vs target", ex.measured_gap, ex.target + 2.0 * ex.solver_tol,
          ex.measured_gap <= ex.target + 2.0 * ex.solver_tol);
  s.check("measured gap vs certified bound", ex.measured_gap, ex.predicted_gap + 2.0 * ex.solver_tol,
          ex.measured_gap <= ex.predicted_gap + 2.0 * ex.solver_tol);
  const double bx = barrier_excess(ex.solution, ex.barrier_lower, ex.barrier_upper);
  s.check("barrier excess at t=0", bx, ex.solver_tol, bx <= ex.solver_tol);
}

void run_solve(const RunConfig& cfg, Summary& s, const std::filesystem::path& out) {
  const ExactSolution ex = solve_exact(cfg.problem, cfg.grid, cfg.target_gap, exact_options(cfg));
  record_exact(ex, s);
  write_file(out / "solution.csv", ex.solution.to_csv());
}

void run_golden(const RunConfig& cfg, Summary& s, const std::filesystem::path& out) {
  if (!cfg.reference) throw ConfigError("/reference", "the golden experiment needs a closed-form reference");
  const ExactSolution ex = solve_exact(cfg.problem, cfg.grid, cfg.target_gap, exact_options(cfg));
  record_exact(ex, s);
  const double err = reference_error(ex.solution, *cfg.reference);
  s.data()["reference_error"] = err;
  s.check("max core |u - reference|", err, cfg.reference_tol, err <= cfg.reference_tol);

  std::string csv = "# g-bsde-lab schema v1\nx,u0,reference,error,barrier_lower,barrier_upper\n";
  const auto& g = ex.solution.grid();
  for (std::size_t i = 0; i < g.nx; ++i) {
    if (!g.in_core(g.x(i))) continue;
    const double u = ex.solution.initial()[i];
    const double r = (*cfg.reference)(Env{0.0, g.x(i), 0, 0});
    csv += num(g.x(i)) + ',' + num(u) + ',' + num(r) + ',' + num(u - r) + ',' + num(ex.barrier_lower.initial()[i]) +
           ',' + num(ex.barrier_upper.initial()[i]) + '\n';
  }
  write_file(out / "golden.csv", csv);

  if (!cfg.levels.empty()) {
    LadderOptions lo;
    lo.solver_tol = cfg.solver_tol;
    lo.barriers = false;
    record_ladder(approximation_ladder(cfg.problem, cfg.levels, cfg.grid, lo), s, out);
  }
}

void run_compare(const RunConfig& cfg, Summary& s, const std::filesystem::path& out) {
  const PdeProblem& p2 = cfg.problem2 ? *cfg.problem2 : cfg.problem;
  const ComparisonReport rep = compare(cfg.problem, p2, cfg.grid, cfg.target_gap, exact_options(cfg));
  s.data()["level"] = rep.n;
  s.data()["min_difference"] = rep.min_difference;
  s.data()["max_difference"] = rep.max_difference;
  s.data()["gap1"] = rep.gap1;
  s.data()["gap2"] = rep.gap2;
  s.check("min core (u2 - u1)", rep.min_difference, -rep.tolerance, rep.pass, ">=");
  write_file(out / "compare.csv", rep.report_csv());
}

void run_kcheck(const RunConfig& cfg, Summary& s, const std::filesystem::path& out) {
  const auto& p = cfg.problem;
  const ExactSolution ex = solve_exact(p, cfg.grid, cfg.target_gap, exact_options(cfg));
  s.data()["level"] = ex.n;
  std::string csv = "# g-bsde-lab schema v1\npolicy,path,K_T,max_increase,scale\n";
  for (const auto& name : cfg.mc.policies) {
    const ControlPolicy pol = make_policy(name, p.gparams, &ex.solution, p);
    SimOptions opts;
    opts.forward = &p.coeffs;
    opts.x0 = cfg.mc.x0;
    const PathEnsemble ens = simulate_paths(pol, p.gparams, 0.0, p.T, cfg.mc.dt, cfg.mc.n_paths, cfg.mc.seed, opts);
    const SolutionTriple tr = extract_triple(ex.solution, ens, p);
    const KCheck kc = check_k(tr, ex.solution, ens);
    s.check("K nonincreasing under " + name, kc.max_increase, kc.tolerance_factor, kc.nonincreasing);
    if (name == "feedback") s.check("K_T flat under " + name, kc.max_terminal, kc.tolerance_factor, kc.terminal_flat);
    const std::size_t nr = tr.times.size();
    for (std::size_t q = 0; q < tr.n_paths; ++q) {
      double scale = 0.0, inc = 0.0;
      for (std::size_t r = 0; r < nr; ++r) scale = std::max(scale, std::abs(tr.Y[tr.at(q, r)]));
      for (std::size_t r = 0; r + 1 < nr; ++r) inc = std::max(inc, tr.K[tr.at(q, r + 1)] - tr.K[tr.at(q, r)]);
      csv += name + ',' + std::to_string(q) + ',' + num(tr.K[tr.at(q, nr - 1)]) + ',' + num(inc) + ',' +
             num(1.0 + scale) + '\n';
    }
  }
  write_file(out / "kcheck.csv", csv);
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "top level must be an object");
  const Node root(&doc, "");
  RunConfig cfg;

  Node gpn = root.object("gparams");
  try {
    cfg.problem.gparams = GParams::make(gpn.number("sigma_low_sq"), gpn.number("sigma_high_sq"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(gpn.pointer(), e.what());
  }
  const GParams gp = cfg.problem.gparams;
  cfg.constants["sls"] = gp.sigma_low_sq;
  cfg.constants["shs"] = gp.sigma_high_sq;
  if (root.has("constants")) {
    Node cn = root.object("constants");
    for (const auto& [k, v] : cn.raw().items()) {
      if (!v.is_number()) throw ConfigError(cn.at_ptr(k.c_str()), "expected a number");
      cfg.constants[k] = v.get<double>();
    }
  }

  if (root.has("grid")) {
    Node g = root.object("grid");
    cfg.grid.x_min = g.number("x_min", cfg.grid.x_min);
    cfg.grid.x_max = g.number("x_max", cfg.grid.x_max);
    cfg.grid.nx = g.count("nx", cfg.grid.nx);
    cfg.grid.core_fraction = g.number("core_fraction", cfg.grid.core_fraction);
    cfg.grid.max_stored_layers = g.count("max_stored_layers", cfg.grid.max_stored_layers);
    cfg.grid.max_steps = g.count("max_steps", cfg.grid.max_steps);
    if (cfg.grid.nx < 3) throw ConfigError(g.at_ptr("nx"), "must be >= 3");
    if (!(cfg.grid.x_min < cfg.grid.x_max)) throw ConfigError(g.at_ptr("x_max"), "must exceed x_min");
    if (!(cfg.grid.core_fraction > 0.0 && cfg.grid.core_fraction <= 1.0)) {
      throw ConfigError(g.at_ptr("core_fraction"), "must lie in (0, 1]");
    }
  }

  cfg.problem = read_problem(root.object("problem"), gp, cfg.constants, cfg.grid);
  if (root.has("problem2")) cfg.problem2 = read_problem(root.object("problem2"), gp, cfg.constants, cfg.grid);

  if (root.has("ladder")) {
    Node l = root.object("ladder");
    if (l.has("levels")) {
      Node lv = l.child("levels");
      if (!lv.raw().is_array()) throw ConfigError(lv.pointer(), "expected an array of numbers");
      for (std::size_t i = 0; i < lv.raw().size(); ++i) {
        if (!lv.raw()[i].is_number()) throw ConfigError(lv.pointer() + "/" + std::to_string(i), "expected a number");
        cfg.levels.push_back(lv.raw()[i].get<double>());
      }
    }
    cfg.solver_tol = l.number("solver_tol", cfg.solver_tol);
    cfg.target_gap = l.number("target_gap", cfg.target_gap);
    if (!(cfg.solver_tol >= 0.0)) throw ConfigError(l.at_ptr("solver_tol"), "must be >= 0");
    if (!(cfg.target_gap > 0.0)) throw ConfigError(l.at_ptr("target_gap"), "must be > 0");
  }

  if (root.has("mc")) {
    Node m = root.object("mc");
    cfg.mc.n_paths = m.count("n_paths", cfg.mc.n_paths);
    cfg.mc.dt = m.number("dt", cfg.mc.dt);
    cfg.mc.seed = m.count("seed", cfg.mc.seed);
    cfg.mc.x0 = m.number("x0", cfg.mc.x0);
    cfg.mc.se_multiplier = m.number("se_multiplier", cfg.mc.se_multiplier);
    cfg.mc.dominance_slack = m.number("dominance_slack", cfg.mc.dominance_slack);
    cfg.mc.feedback_slack = m.number("feedback_slack", cfg.mc.feedback_slack);
    if (m.has("policies")) {
      Node pl = m.child("policies");
      if (!pl.raw().is_array() || pl.raw().empty()) throw ConfigError(pl.pointer(), "expected a non-empty array");
      cfg.mc.policies.clear();
      for (std::size_t i = 0; i < pl.raw().size(); ++i) {
        if (!pl.raw()[i].is_string()) throw ConfigError(pl.pointer() + "/" + std::to_string(i), "expected a string");
        cfg.mc.policies.push_back(pl.raw()[i].get<std::string>());
      }
    }
    if (cfg.mc.n_paths == 0) throw ConfigError(m.at_ptr("n_paths"), "must be >= 1");
    if (!(cfg.mc.dt > 0.0)) throw ConfigError(m.at_ptr("dt"), "must be > 0");
  }

  if (root.has("reference")) {
    Node r = root.object("reference");
    cfg.reference = expression(r, "u", "", cfg.constants);
    cfg.reference_tol = r.number("tolerance", cfg.reference_tol);
  }
  cfg.envelope_samples = root.count("envelope_samples", cfg.envelope_samples);
  cfg.experiment = root.text("experiment", "");
  cfg.output_dir = root.text("output", cfg.output_dir);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"upper-expectation", "envelope-report", "ladder", "solve",
                                              "golden",            "compare",         "kcheck"};
  return names;
}

int run(const RunConfig& config, const std::string& experiment, std::ostream& log) {
  const std::filesystem::path out(config.output_dir);
  Summary s(experiment);
  try {
    std::filesystem::create_directories(out);
    s.set("seed", config.mc.seed);
    if (experiment == "upper-expectation") {
      run_upper_expectation(config, s, out);
    } else if (experiment == "envelope-report") {
      run_envelope_report(config, s, out);
    } else if (experiment == "ladder") {
      run_ladder(config, s, out);
    } else if (experiment == "solve") {
      run_solve(config, s, out);
    } else if (experiment == "golden") {
      run_golden(config, s, out);
    } else if (experiment == "compare") {
      run_compare(config, s, out);
    } else if (experiment == "kcheck") {
      run_kcheck(config, s, out);
    } else {
      log << "error: unknown experiment '" << experiment << "'\n";
      return 2;
    }
    write_file(out / "summary.json", s.dump());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
  log << experiment << ": " << (s.pass() ? "all certified bounds hold" : "some certified bound FAILED") << " ("
      << (out / "summary.json").string() << ")\n";
  return s.pass() ? 0 : 1;
}

}  // namespace gbsde

#include "gbsde/pde.hpp"

#include "gbsde/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>

namespace gbsde {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Core maxima of |Phi'| sigma used to size the z-lattice.
double terminal_gradient_scale(const PdeProblem& problem, double x_min, double x_max, std::size_t nx) {
  const double dx = (x_max - x_min) / static_cast<double>(nx - 1);
  const auto& c = problem.coeffs;
  double scale = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    const double x = x_min + dx * static_cast<double>(i);
    const double grad = (c.Phi(Env{problem.T, x + dx, 0, 0}) - c.Phi(Env{problem.T, x - dx, 0, 0})) / (2.0 * dx);
    for (double t : {0.0, 0.5 * problem.T, problem.T}) {
      scale = std::max(scale, std::abs(grad * c.sigma(Env{t, x, 0, 0})));
    }
  }
  return scale;
}

}  // namespace

// ---------------------------------------------------------------------------
// Problem data

void CoefficientSet::check(double x_lo, double x_hi, double T) const {
  std::mt19937_64 rng(0xc0ffeeULL);
  std::uniform_real_distribution<double> ux(x_lo, x_hi), ut(0.0, T);
  for (int k = 0; k < 500; ++k) {
    const double t = ut(rng), x1 = ux(rng), x2 = ux(rng);
    const double dx = std::abs(x1 - x2);
    for (const auto* c : {&b, &h, &sigma}) {
      const double d = std::abs((*c)(Env{t, x1, 0, 0}) - (*c)(Env{t, x2, 0, 0}));
      if (d > lip_const * dx * (1.0 + 1e-9) + 1e-12) {
        std::ostringstream os;
        os << "coefficient '" << c->to_string() << "' is not Lipschitz with constant " << lip_const << " between x="
           << x1 << " and x=" << x2;
        throw InvalidArgument(os.str());
      }
    }
    const double dphi = std::abs(Phi(Env{T, x1, 0, 0}) - Phi(Env{T, x2, 0, 0}));
    const double bound =
        lip_const * (1.0 + std::pow(std::abs(x1), growth_q) + std::pow(std::abs(x2), growth_q)) * dx;
    if (dphi > bound * (1.0 + 1e-9) + 1e-12) {
      std::ostringstream os;
      os << "terminal data '" << Phi.to_string() << "' violates the polynomial Lipschitz bound (L=" << lip_const
         << ", q=" << growth_q << ") between x=" << x1 << " and x=" << x2;
      throw InvalidArgument(os.str());
    }
  }
}

double CoefficientSet::fitted_lip_const(double x_lo, double x_hi, double T) const {
  std::mt19937_64 rng(0xc0ffeeULL);
  std::uniform_real_distribution<double> ux(x_lo, x_hi), ut(0.0, T);
  double worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double t = ut(rng), x1 = ux(rng), x2 = ux(rng);
    const double dx = std::abs(x1 - x2);
    if (dx == 0.0) continue;
    for (const auto* c : {&b, &h, &sigma}) {
      worst = std::max(worst, std::abs((*c)(Env{t, x1, 0, 0}) - (*c)(Env{t, x2, 0, 0})) / dx);
    }
    const double w = 1.0 + std::pow(std::abs(x1), growth_q) + std::pow(std::abs(x2), growth_q);
    worst = std::max(worst, std::abs(Phi(Env{T, x1, 0, 0}) - Phi(Env{T, x2, 0, 0})) / (w * dx));
  }
  return worst;
}

void PdeProblem::validate() const {
  gparams.validate();
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("PdeProblem: T must be > 0");
  if (!(lip_z_bound >= 0.0)) throw InvalidArgument("PdeProblem: lip_z_bound must be >= 0");
  for (const auto* e : {&coeffs.b, &coeffs.h, &coeffs.sigma}) {
    if (e->depends_on(Var::Y) || e->depends_on(Var::Z)) {
      throw InvalidArgument("PdeProblem: coefficient '" + e->to_string() + "' may only depend on t and x");
    }
  }
  if (coeffs.Phi.vars() & ~var_bit(Var::X)) {
    throw InvalidArgument("PdeProblem: terminal data '" + coeffs.Phi.to_string() + "' may only depend on x");
  }
}

// ---------------------------------------------------------------------------
// Driver

namespace {

ZSplit require_split(const ScalarGenerator& gen) {
  auto split = split_z(gen.body);
  if (!split) {
    throw InvalidArgument("generator '" + gen.body.to_string() +
                          "' couples z with (t, x, y); envelope levels need the form base(t, x, y) + k(z)");
  }
  return *split;
}

}  // namespace

Driver Driver::direct(const ScalarGenerator& gen, double lip_z, const std::shared_ptr<const ZLattice>& lattice) {
  Driver d;
  d.lip_y_ = gen.lip_y;
  d.tag_ = "direct";
  if (!gen.depends_on_z()) {
    d.kind_ = Kind::Plain;
    d.base_ = gen.body;
    return d;
  }
  if (auto split = split_z(gen.body)) {
    d.kind_ = Kind::Tabulated;
    d.base_ = split->base;
    const Expr k = split->zpart;
    d.profile_ = ZProfile::sample(lattice, [&](double z) { return k(Env{0, 0, 0, z}); });
    const double slope = d.profile_.lipschitz();
    if (slope > lip_z * (1.0 + 1e-9) + 1e-12) {
      std::ostringstream os;
      os << "generator '" << gen.body.to_string() << "' has z-slope " << slope << " above the declared bound "
         << lip_z << "; solve it through the envelope ladder";
      throw InvalidArgument(os.str());
    }
    d.lip_z_ = lip_z;
    return d;
  }
  if (!(lip_z > 0.0)) throw InvalidArgument("Driver: a z-dependent generator needs lip_z_bound > 0");
  d.kind_ = Kind::Mixed;
  d.mixed_ = gen.body;
  d.lip_z_ = lip_z;
  return d;
}

Driver Driver::lower_level(const ScalarGenerator& gen, double n, const std::shared_ptr<const ZLattice>& lattice) {
  if (!(n > gen.growth_L)) throw InvalidArgument("envelope level n must exceed the generator growth constant L");
  Driver d;
  d.lip_y_ = gen.lip_y;
  d.tag_ = "lower n=" + fmt(n);
  if (!gen.depends_on_z()) {
    d.base_ = gen.body;
    return d;
  }
  const ZSplit split = require_split(gen);
  d.kind_ = Kind::Tabulated;
  d.base_ = split.base;
  const Expr k = split.zpart;
  d.profile_ = ZProfile::sample(lattice, [&](double z) { return k(Env{0, 0, 0, z}); }).lower_envelope(n);
  d.lip_z_ = n;
  return d;
}

Driver Driver::upper_level(const ScalarGenerator& gen, double n, const std::shared_ptr<const ZLattice>& lattice) {
  if (!(n > gen.growth_L)) throw InvalidArgument("envelope level n must exceed the generator growth constant L");
  Driver d;
  d.lip_y_ = gen.lip_y;
  d.tag_ = "upper n=" + fmt(n);
  if (!gen.depends_on_z()) {
    d.base_ = gen.body;
    return d;
  }
  const ZSplit split = require_split(gen);
  d.kind_ = Kind::Tabulated;
  d.base_ = split.base;
  const Expr k = split.zpart;
  d.profile_ = ZProfile::sample(lattice, [&](double z) { return k(Env{0, 0, 0, z}); }).upper_envelope(n);
  d.lip_z_ = n;
  return d;
}

Driver Driver::barrier(const ScalarGenerator& gen, double L, double sign,
                       const std::shared_ptr<const ZLattice>& lattice) {
  Driver d;
  d.kind_ = Kind::Tabulated;
  d.lip_y_ = L;
  d.lip_z_ = L;
  d.tag_ = sign > 0 ? "barrier upper" : "barrier lower";
  const Expr phi0 = substitute(substitute(gen.body, Var::Y, 0.0), Var::Z, 0.0);
  const Expr growth = Expr::binary(Op::Mul, Expr::constant(sign * L),
                                   Expr::binary(Op::Add, Expr::constant(1.0),
                                                Expr::unary(Op::Abs, Expr::variable(Var::Y))));
  d.base_ = Expr::binary(Op::Add, phi0, growth);
  d.profile_ = ZProfile::sample(lattice, [&](double z) { return sign * L * std::abs(z); });
  return d;
}

Driver Driver::shifted(double offset) const {
  Driver d = *this;
  if (kind_ == Kind::Mixed) {
    d.mixed_ = Expr::binary(Op::Add, mixed_, Expr::constant(offset));
  } else {
    d.base_ = Expr::binary(Op::Add, base_, Expr::constant(offset));
  }
  d.tag_ += " +" + fmt(offset);
  return d;
}

double Driver::value(double t, double x, double y, double z) const {
  switch (kind_) {
    case Kind::Plain: return base_(Env{t, x, y, z});
    case Kind::Tabulated: return base_(Env{t, x, y, z}) + profile_(z);
    case Kind::Mixed: return mixed_(Env{t, x, y, z});
  }
  return 0.0;
}

double Driver::flux(double t, double x, double y, double base_value, double pm, double pp, double sigma) const {
  switch (kind_) {
    case Kind::Plain:
      return base_value;
    case Kind::Tabulated:
      return sigma >= 0.0 ? base_value + profile_.godunov(sigma * pm, sigma * pp)
                          : base_value + profile_.godunov(sigma * pp, sigma * pm);
    case Kind::Mixed:
      return mixed_(Env{t, x, y, 0.5 * sigma * (pm + pp)}) + 0.5 * lip_z_ * std::abs(sigma) * (pp - pm);
  }
  return 0.0;
}

std::string Driver::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Plain: os << "plain[" << base_.to_string() << "]"; break;
    case Kind::Tabulated:
      os << "tabulated[" << tag_ << "; base=" << base_.to_string() << "; lattice=" << profile_.lattice().size()
         << "x" << fmt(profile_.lattice().z_max()) << "; digest=";
      {
        std::string raw(reinterpret_cast<const char*>(profile_.values().data()),
                        profile_.values().size() * sizeof(double));
        os << digest(raw);
      }
      os << "]";
      break;
    case Kind::Mixed: os << "mixed[" << mixed_.to_string() << "; lf=" << fmt(lip_z_) << "]"; break;
  }
  os << " ly=" << fmt(lip_y_) << " lz=" << fmt(lip_z_);
  return os.str();
}

std::string PdeOperator::fingerprint() const {
  std::ostringstream os;
  os << "b=" << coeffs.b.to_string() << ";h=" << coeffs.h.to_string() << ";sigma=" << coeffs.sigma.to_string()
     << ";Phi=" << coeffs.Phi.to_string() << ";f=" << f.describe() << ";g=" << g.describe()
     << ";G=" << fmt(gparams.sigma_low_sq) << "," << fmt(gparams.sigma_high_sq) << ";T=" << fmt(T);
  return digest(os.str());
}

std::shared_ptr<const ZLattice> make_lattice(const PdeProblem& problem, double x_min, double x_max, std::size_t nx,
                                             double n_min, const LatticeSpec& spec) {
  if (nx < 3) throw InvalidArgument("make_lattice: nx must be >= 3");
  double z_query = spec.z_max;
  if (z_query <= 0.0) z_query = std::max(10.0, 4.0 * terminal_gradient_scale(problem, x_min, x_max, nx));
  double z_lat = z_query;
  if (n_min > 0.0) {
    const double L = std::max(problem.f.growth_L, problem.g.growth_L);
    z_lat += search_radius(L, n_min, 0.0, z_query);
  }
  return ZLattice::graded(z_lat, spec.h_min, spec.rel);
}

PdeOperator direct_operator(const PdeProblem& problem, const std::shared_ptr<const ZLattice>& lattice) {
  problem.validate();
  PdeOperator op;
  op.coeffs = problem.coeffs;
  op.f = Driver::direct(problem.f, problem.lip_z_bound, lattice);
  op.g = Driver::direct(problem.g, problem.lip_z_bound, lattice);
  op.gparams = problem.gparams;
  op.T = problem.T;
  return op;
}

// ---------------------------------------------------------------------------
// Grid

double SpaceTimeGrid::core_lo() const {
  const double mid = 0.5 * (x_min + x_max);
  return mid - 0.5 * core_fraction * (x_max - x_min);
}

double SpaceTimeGrid::core_hi() const {
  const double mid = 0.5 * (x_min + x_max);
  return mid + 0.5 * core_fraction * (x_max - x_min);
}

double monotonicity_rate(const PdeOperator& op, double x_min, double x_max, std::size_t nx) {
  if (nx < 3) throw InvalidArgument("build_grid: nx must be >= 3");
  if (!(x_min < x_max)) throw InvalidArgument("build_grid: x_min must be < x_max");
  const double dx = (x_max - x_min) / static_cast<double>(nx - 1);
  double s_max = 0.0, b_max = 0.0, h_max = 0.0;
  constexpr int kTimes = 17;
  for (int k = 0; k < kTimes; ++k) {
    const double t = op.T * k / (kTimes - 1);
    for (std::size_t i = 0; i < nx; ++i) {
      const Env env{t, x_min + dx * static_cast<double>(i), 0, 0};
      const double b = op.coeffs.b(env), h = op.coeffs.h(env), s = op.coeffs.sigma(env);
      if (!std::isfinite(b) || !std::isfinite(h) || !std::isfinite(s)) {
        throw InvalidArgument("build_grid: non-finite coefficient sample");
      }
      s_max = std::max(s_max, std::abs(s));
      b_max = std::max(b_max, std::abs(b));
      h_max = std::max(h_max, std::abs(h));
    }
  }
  const double hi = op.gparams.sigma_high_sq;
  const double lz = op.f.lip_z() + hi * op.g.lip_z();
  const double ly = op.f.lip_y() + hi * op.g.lip_y();
  return hi * s_max * s_max / (dx * dx) + (b_max + hi * 2.0 * h_max + lz * s_max) / dx + ly;
}

SpaceTimeGrid build_grid(const PdeOperator& op, double x_min, double x_max, std::size_t nx,
                         const GridOptions& options) {
  if (!(options.core_fraction > 0.0 && options.core_fraction <= 1.0)) {
    throw InvalidArgument("build_grid: core_fraction must lie in (0, 1]");
  }
  SpaceTimeGrid grid;
  grid.x_min = x_min;
  grid.x_max = x_max;
  grid.nx = nx;
  grid.T = op.T;
  grid.core_fraction = options.core_fraction;
  grid.cfl_rate = monotonicity_rate(op, x_min, x_max, nx);
  const double dt_max = grid.cfl_rate > 0.0 ? 0.9 / grid.cfl_rate : op.T;
  const double steps = std::ceil(op.T / dt_max * (1.0 + 1e-12));
  if (steps > static_cast<double>(options.max_steps)) {
    std::ostringstream os;
    os << "build_grid: monotone time step needs " << steps << " steps (limit " << options.max_steps
       << "); coarsen the grid or lower the envelope level";
    throw SolverError(os.str());
  }
  grid.nt = std::max<std::size_t>(1, static_cast<std::size_t>(steps));
  grid.dt = op.T / static_cast<double>(grid.nt);
  const std::size_t layers = std::max<std::size_t>(2, options.max_stored_layers);
  grid.layer_stride = std::max<std::size_t>(1, (grid.nt + layers - 2) / (layers - 1));
  return grid;
}

SpaceTimeGrid build_grid(const PdeProblem& problem, double x_min, double x_max, std::size_t nx,
                         const GridOptions& options) {
  if (nx < 3) throw InvalidArgument("build_grid: nx must be >= 3");
  auto lattice = make_lattice(problem, x_min, x_max, nx, 0.0);
  return build_grid(direct_operator(problem, lattice), x_min, x_max, nx, options);
}

// ---------------------------------------------------------------------------
// Scheme

namespace {

class Scheme {
 public:
  Scheme(const PdeOperator& op, const SpaceTimeGrid& grid) : op_(op), grid_(grid), dx_(grid.dx()) {
    const std::size_t n = grid.nx;
    xs_.resize(n);
    for (std::size_t i = 0; i < n; ++i) xs_[i] = grid.x(i);
    const auto& c = op.coeffs;
    coeff_static_ = !(c.b.depends_on(Var::T) || c.h.depends_on(Var::T) || c.sigma.depends_on(Var::T));
    if (coeff_static_) fill_coeffs(0.0, b_, h_, s_);
    f_static_ = !(op.f.base().depends_on(Var::T) || op.f.base().depends_on(Var::Y)) && op.f.kind() != Driver::Kind::Mixed;
    g_static_ = !(op.g.base().depends_on(Var::T) || op.g.base().depends_on(Var::Y)) && op.g.kind() != Driver::Kind::Mixed;
    if (f_static_) fill_base(op.f, 0.0, fbase_);
    if (g_static_) fill_base(op.g, 0.0, gbase_);
    g_zero_ = op.g.kind() == Driver::Kind::Plain && op.g.base().is_constant() && op.g.base()(Env{}) == 0.0;
  }

  void step(const std::vector<double>& u, double t, std::vector<double>& out) const {
    const std::size_t n = grid_.nx;
    if (u.size() != n) throw InvalidArgument("step_backward: layer size does not match the grid");
    out.resize(n);
    std::vector<double> bl, hl, sl;
    const std::vector<double>* b = &b_;
    const std::vector<double>* h = &h_;
    const std::vector<double>* s = &s_;
    if (!coeff_static_) {
      fill_coeffs(t, bl, hl, sl);
      b = &bl;
      h = &hl;
      s = &sl;
    }
    const double dt = grid_.dt;
    const double inv_dx = 1.0 / dx_;
    const double inv_dx2 = inv_dx * inv_dx;
    const double lo = op_.gparams.sigma_low_sq, hi = op_.gparams.sigma_high_sq;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = xs_[i];
      const double uc = u[i];
      double pm, pp, d2;
      if (i == 0) {
        pm = pp = (u[1] - uc) * inv_dx;
        d2 = 0.0;
      } else if (i + 1 == n) {
        pm = pp = (uc - u[i - 1]) * inv_dx;
        d2 = 0.0;
      } else {
        pm = (uc - u[i - 1]) * inv_dx;
        pp = (u[i + 1] - uc) * inv_dx;
        d2 = (u[i + 1] - 2.0 * uc + u[i - 1]) * inv_dx2;
      }
      const double bi = (*b)[i], hi_c = (*h)[i], si = (*s)[i];
      double H = si * si * d2 + 2.0 * hi_c * (hi_c > 0.0 ? pp : pm);
      if (!g_zero_) {
        const double gb = g_static_ ? gbase_[i] : base_at(op_.g, t, x, uc);
        H += 2.0 * op_.g.flux(t, x, uc, gb, pm, pp, si);
      }
      const double G = 0.5 * (hi * std::max(H, 0.0) - lo * std::max(-H, 0.0));
      const double fb = f_static_ ? fbase_[i] : base_at(op_.f, t, x, uc);
      const double fv = op_.f.flux(t, x, uc, fb, pm, pp, si);
      const double v = uc + dt * (G + bi * (bi > 0.0 ? pp : pm) + fv);
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "step_backward: non-finite value at node " << i << " (x=" << x << ", t=" << t
           << "); check the monotonicity bound";
        throw SolverError(os.str());
      }
      out[i] = v;
    }
  }

 private:
  static double base_at(const Driver& d, double t, double x, double y) {
    return d.kind() == Driver::Kind::Mixed ? 0.0 : d.base()(Env{t, x, y, 0.0});
  }

  void fill_coeffs(double t, std::vector<double>& b, std::vector<double>& h, std::vector<double>& s) const {
    const std::size_t n = xs_.size();
    b.resize(n);
    h.resize(n);
    s.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Env env{t, xs_[i], 0, 0};
      b[i] = op_.coeffs.b(env);
      h[i] = op_.coeffs.h(env);
      s[i] = op_.coeffs.sigma(env);
    }
  }

  void fill_base(const Driver& d, double t, std::vector<double>& out) const {
    out.resize(xs_.size());
    for (std::size_t i = 0; i < xs_.size(); ++i) out[i] = base_at(d, t, xs_[i], 0.0);
  }

  const PdeOperator& op_;
  const SpaceTimeGrid& grid_;
  double dx_;
  std::vector<double> xs_;
  bool coeff_static_ = false;
  bool f_static_ = false;
  bool g_static_ = false;
  bool g_zero_ = false;
  std::vector<double> b_, h_, s_, fbase_, gbase_;
};

std::vector<double> terminal_layer(const PdeOperator& op, const SpaceTimeGrid& grid) {
  std::vector<double> u(grid.nx);
  for (std::size_t i = 0; i < grid.nx; ++i) u[i] = op.coeffs.Phi(Env{op.T, grid.x(i), 0, 0});
  return u;
}

}  // namespace

std::vector<double> step_backward(const std::vector<double>& u_next, double t, const PdeOperator& op,
                                  const SpaceTimeGrid& grid) {
  for (double v : u_next) {
    if (!std::isfinite(v)) throw InvalidArgument("step_backward: input layer is not finite");
  }
  std::vector<double> out;
  Scheme(op, grid).step(u_next, t, out);
  return out;
}

std::vector<double> step_backward(const std::vector<double>& u_next, double t, const PdeProblem& problem,
                                  const SpaceTimeGrid& grid) {
  auto lattice = make_lattice(problem, grid.x_min, grid.x_max, grid.nx, 0.0);
  return step_backward(u_next, t, direct_operator(problem, lattice), grid);
}

PdeSolution solve(const PdeOperator& op, const SpaceTimeGrid& grid) {
  if (std::abs(grid.T - op.T) > 1e-12 * std::max(1.0, op.T)) {
    throw InvalidArgument("solve: grid horizon does not match the problem");
  }
  if (grid.dt * monotonicity_rate(op, grid.x_min, grid.x_max, grid.nx) > 0.9 * (1.0 + 1e-9)) {
    throw InvalidArgument("solve: grid time step violates this operator's monotonicity bound; rebuild the grid");
  }
  Scheme scheme(op, grid);
  std::vector<double> u = terminal_layer(op, grid);
  std::vector<double> next;
  std::vector<double> times{op.T};
  std::vector<std::vector<double>> layers{u};
  for (std::size_t k = grid.nt; k-- > 0;) {
    const double t = grid.dt * static_cast<double>(k);
    scheme.step(u, t, next);
    u.swap(next);
    if (k % grid.layer_stride == 0) {
      times.push_back(k == 0 ? 0.0 : t);
      layers.push_back(u);
    }
  }
  std::reverse(times.begin(), times.end());
  std::reverse(layers.begin(), layers.end());
  return PdeSolution(grid, std::move(times), std::move(layers), op.fingerprint());
}

PdeSolution solve(const PdeProblem& problem, const SpaceTimeGrid& grid) {
  auto lattice = make_lattice(problem, grid.x_min, grid.x_max, grid.nx, 0.0);
  return solve(direct_operator(problem, lattice), grid);
}

// ---------------------------------------------------------------------------
// Solution

PdeSolution::PdeSolution(SpaceTimeGrid grid, std::vector<double> times, std::vector<std::vector<double>> layers,
                         std::string fingerprint)
    : grid_(grid), times_(std::move(times)), layers_(std::move(layers)), fingerprint_(std::move(fingerprint)) {
  if (times_.size() != layers_.size() || times_.empty()) throw InvalidArgument("PdeSolution: malformed layers");
}

double PdeSolution::eval_u(double t, double x) const {
  const double tol_t = 1e-12 * std::max(1.0, grid_.T);
  const double tol_x = 1e-12 * std::max(1.0, grid_.x_max - grid_.x_min);
  if (t < times_.front() - tol_t || t > times_.back() + tol_t || x < grid_.x_min - tol_x || x > grid_.x_max + tol_x ||
      std::isnan(t) || std::isnan(x)) {
    std::ostringstream os;
    os << "eval_u: (t=" << t << ", x=" << x << ") outside [" << times_.front() << ", " << times_.back() << "] x ["
       << grid_.x_min << ", " << grid_.x_max << "]";
    throw InvalidArgument(os.str());
  }
  t = std::clamp(t, times_.front(), times_.back());
  x = std::clamp(x, grid_.x_min, grid_.x_max);
  std::size_t k = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
  k = std::clamp<std::size_t>(k, 1, times_.size() - 1) - 1;
  const double dx = grid_.dx();
  std::size_t i = static_cast<std::size_t>(std::floor((x - grid_.x_min) / dx));
  i = std::min(i, grid_.nx - 2);
  const double wx = (x - grid_.x(i)) / dx;
  auto at = [&](std::size_t layer) {
    const auto& u = layers_[layer];
    return wx == 0.0 ? u[i] : u[i] + wx * (u[i + 1] - u[i]);
  };
  if (times_.size() == 1) return at(0);
  const double t0 = times_[k], t1 = times_[k + 1];
  const double wt = (t - t0) / (t1 - t0);
  const double a = at(k);
  if (wt == 0.0) return a;
  const double c = at(k + 1);
  if (wt == 1.0) return c;
  return a + wt * (c - a);
}

double PdeSolution::grad_x(double t, double x) const {
  const double dx = grid_.dx();
  const double tol = 1e-12 * std::max(1.0, grid_.x_max - grid_.x_min);
  if (x - dx < grid_.x_min - tol || x + dx > grid_.x_max + tol) {
    std::ostringstream os;
    os << "grad_x: x=" << x << " is within one grid spacing of the boundary; pad the domain";
    throw InvalidArgument(os.str());
  }
  return (eval_u(t, x + dx) - eval_u(t, x - dx)) / (2.0 * dx);
}

double PdeSolution::hess_x(double t, double x) const {
  const double dx = grid_.dx();
  const double tol = 1e-12 * std::max(1.0, grid_.x_max - grid_.x_min);
  if (x - dx < grid_.x_min - tol || x + dx > grid_.x_max + tol) {
    std::ostringstream os;
    os << "hess_x: x=" << x << " is within one grid spacing of the boundary; pad the domain";
    throw InvalidArgument(os.str());
  }
  return (eval_u(t, x + dx) - 2.0 * eval_u(t, x) + eval_u(t, x - dx)) / (dx * dx);
}

double PdeSolution::max_core_diff(const PdeSolution& other) const {
  if (other.layers_.size() != layers_.size() || other.grid_.nx != grid_.nx) {
    throw InvalidArgument("max_core_diff: solutions live on different grids");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    for (std::size_t i = 0; i < grid_.nx; ++i) {
      if (!grid_.in_core(grid_.x(i))) continue;
      worst = std::max(worst, std::abs(layers_[k][i] - other.layers_[k][i]));
    }
  }
  return worst;
}

double PdeSolution::min_core_excess(const PdeSolution& other) const {
  if (other.layers_.size() != layers_.size() || other.grid_.nx != grid_.nx) {
    throw InvalidArgument("min_core_excess: solutions live on different grids");
  }
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    for (std::size_t i = 0; i < grid_.nx; ++i) {
      if (!grid_.in_core(grid_.x(i))) continue;
      worst = std::min(worst, other.layers_[k][i] - layers_[k][i]);
    }
  }
  return worst;
}

std::string PdeSolution::to_csv() const {
  std::string out = "# g-bsde-lab schema v1\n# fingerprint " + fingerprint_ + "\nt";
  for (std::size_t i = 0; i < grid_.nx; ++i) out += "," + fmt(grid_.x(i));
  out += '\n';
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    out += fmt(times_[k]);
    for (double v : layers_[k]) out += "," + fmt(v);
    out += '\n';
  }
  return out;
}

std::string digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gbsde

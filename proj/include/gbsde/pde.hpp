#pragma once

// Explicit monotone finite-difference solver, backward in time from terminal
// data, for
//
//   u_t + G(sigma^2 u_xx + 2 h u_x + 2 g(t, x, u, sigma u_x))
//       + b u_x + f(t, x, u, sigma u_x) = 0,      u(T, x) = Phi(x).
//
// The z-dependence of f and g enters through a monotone numerical flux: a
// Godunov flux on a tabulated z-profile when the generator splits as
// base(t, x, y) + k(z), and a Lax-Friedrichs flux otherwise.

#include "gbsde/envelope.hpp"
#include "gbsde/expr.hpp"
#include "gbsde/gfunction.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gbsde {

/// Forward coefficients b, h, sigma in (t, x) and terminal data Phi in x.
struct CoefficientSet {
  Expr b = Expr::constant(0.0);
  Expr h = Expr::constant(0.0);
  Expr sigma = Expr::constant(1.0);
  Expr Phi = Expr::constant(0.0);
  double lip_const = 1.0;
  int growth_q = 0;

  /// Sampled Lipschitz / growth checks on [x_lo, x_hi] x [0, T]; throws
  /// InvalidArgument with a witness.
  void check(double x_lo, double x_hi, double T) const;

  /// Smallest lip_const that passes check() for the current growth_q.
  double fitted_lip_const(double x_lo, double x_hi, double T) const;
};

struct PdeProblem {
  CoefficientSet coeffs;
  ScalarGenerator f = ScalarGenerator::constant(0.0);
  ScalarGenerator g = ScalarGenerator::constant(0.0);
  GParams gparams;
  double T = 1.0;
  double lip_z_bound = 0.0;  // z-Lipschitz constant used for direct solves

  void validate() const;
};

/// Settings for the tabulated z-profiles.
struct LatticeSpec {
  double z_max = 0.0;  // 0 selects a range from the terminal data
  double h_min = 1e-8;
  double rel = 2e-4;
};

/// A generator as consumed by the scheme.
class Driver {
 public:
  enum class Kind { Plain, Tabulated, Mixed };

  Driver() = default;

  /// The generator itself. Separable generators are tabulated in z; others
  /// use a Lax-Friedrichs flux with dissipation lip_z |sigma|.
  static Driver direct(const ScalarGenerator& gen, double lip_z, const std::shared_ptr<const ZLattice>& lattice);

  /// Level-n raw envelopes (inf/sup-convolution in z). The generator must
  /// split additively in z.
  static Driver lower_level(const ScalarGenerator& gen, double n, const std::shared_ptr<const ZLattice>& lattice);
  static Driver upper_level(const ScalarGenerator& gen, double n, const std::shared_ptr<const ZLattice>& lattice);

  /// gen(t, x, 0, 0) + sign * L (1 + |y| + |z|).
  static Driver barrier(const ScalarGenerator& gen, double L, double sign,
                        const std::shared_ptr<const ZLattice>& lattice);

  /// Adds a constant offset to the generator (used for shifted comparisons).
  Driver shifted(double offset) const;

  Kind kind() const { return kind_; }
  double lip_y() const { return lip_y_; }
  double lip_z() const { return lip_z_; }
  bool depends_on_z() const { return kind_ != Kind::Plain; }
  const Expr& base() const { return base_; }
  const ZProfile* profile() const { return kind_ == Kind::Tabulated ? &profile_ : nullptr; }

  /// Generator value at (t, x, y, z).
  double value(double t, double x, double y, double z) const;

  /// Monotone flux given backward/forward differences pm, pp and sigma.
  /// `base_value` is base(t, x, y).
  double flux(double t, double x, double y, double base_value, double pm, double pp, double sigma) const;

  std::string describe() const;

 private:
  Kind kind_ = Kind::Plain;
  Expr base_ = Expr::constant(0.0);
  ZProfile profile_;
  Expr mixed_;
  double lip_y_ = 0.0;
  double lip_z_ = 0.0;
  std::string tag_;
};

/// Everything the scheme needs for one solve.
struct PdeOperator {
  CoefficientSet coeffs;
  Driver f;
  Driver g;
  GParams gparams;
  double T = 1.0;

  std::string fingerprint() const;
};

/// Lattice for a problem on [x_min, x_max]: covers the terminal gradient
/// range plus the envelope search radius at level `n_min` (0 when no
/// envelopes are taken).
std::shared_ptr<const ZLattice> make_lattice(const PdeProblem& problem, double x_min, double x_max, std::size_t nx,
                                             double n_min, const LatticeSpec& spec = {});

/// Operator for a direct solve of `problem`.
PdeOperator direct_operator(const PdeProblem& problem, const std::shared_ptr<const ZLattice>& lattice);

struct SpaceTimeGrid {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t nx = 3;
  double dt = 0.0;
  std::size_t nt = 1;
  double T = 1.0;
  double core_fraction = 0.5;
  std::size_t layer_stride = 1;  // every layer_stride-th step is stored
  double cfl_rate = 0.0;         // dt * cfl_rate <= 0.9 (monotonicity)

  double dx() const { return (x_max - x_min) / static_cast<double>(nx - 1); }
  double x(std::size_t i) const { return x_min + dx() * static_cast<double>(i); }
  double core_lo() const;
  double core_hi() const;
  bool in_core(double xv) const { return xv >= core_lo() - 1e-12 && xv <= core_hi() + 1e-12; }
};

struct GridOptions {
  double core_fraction = 0.5;
  std::size_t max_stored_layers = 400;
  std::size_t max_steps = 20'000'000;
};

/// The monotonicity rate
///   s_hi^2 sigma_max^2 / dx^2
///   + (|b|_max + s_hi^2 (2 |h|_max) + (Lz_f + s_hi^2 Lz_g) sigma_max) / dx
///   + Ly_f + s_hi^2 Ly_g
/// with maxima over grid nodes and sampled times. dt = 0.9 / rate, rounded
/// down so that nt dt = T.
double monotonicity_rate(const PdeOperator& op, double x_min, double x_max, std::size_t nx);

SpaceTimeGrid build_grid(const PdeOperator& op, double x_min, double x_max, std::size_t nx,
                         const GridOptions& options = {});
SpaceTimeGrid build_grid(const PdeProblem& problem, double x_min, double x_max, std::size_t nx,
                         const GridOptions& options = {});

class PdeSolution {
 public:
  PdeSolution(SpaceTimeGrid grid, std::vector<double> times, std::vector<std::vector<double>> layers,
              std::string fingerprint);

  const SpaceTimeGrid& grid() const { return grid_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<std::vector<double>>& layers() const { return layers_; }
  const std::vector<double>& initial() const { return layers_.front(); }
  const std::vector<double>& terminal() const { return layers_.back(); }
  const std::string& fingerprint() const { return fingerprint_; }

  /// Bilinear interpolation in (t, x); throws InvalidArgument outside the hull.
  double eval_u(double t, double x) const;

  /// Central difference of interpolated values with stencil dx; requires
  /// x - dx and x + dx inside the hull.
  double grad_x(double t, double x) const;

  /// Central second difference of interpolated values with stencil dx.
  double hess_x(double t, double x) const;

  /// Max over stored layers and core nodes of |u - other|.
  double max_core_diff(const PdeSolution& other) const;

  /// Min over stored layers and core nodes of (other - u).
  double min_core_excess(const PdeSolution& other) const;

  /// CSV text: schema comment, header of x nodes, one row per stored layer
  /// (first column t).
  std::string to_csv() const;

 private:
  SpaceTimeGrid grid_;
  std::vector<double> times_;
  std::vector<std::vector<double>> layers_;
  std::string fingerprint_;
};

/// One explicit Euler step from u_next (at t + dt) to time t.
std::vector<double> step_backward(const std::vector<double>& u_next, double t, const PdeOperator& op,
                                  const SpaceTimeGrid& grid);
std::vector<double> step_backward(const std::vector<double>& u_next, double t, const PdeProblem& problem,
                                  const SpaceTimeGrid& grid);

PdeSolution solve(const PdeOperator& op, const SpaceTimeGrid& grid);
PdeSolution solve(const PdeProblem& problem, const SpaceTimeGrid& grid);

/// FNV-1a digest of a text, rendered as 16 hex digits.
std::string digest(const std::string& text);

}  // namespace gbsde

#pragma once

// Lipschitz regularization of uniformly continuous generators by inf/sup
// convolution with n|z - q|, plus the tabulated z-profiles the PDE solver
// consumes.

#include "gbsde/expr.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace gbsde {

/// Modulus of continuity phi with linear-growth constant L: phi(0) = 0,
/// nondecreasing, subadditive, phi(r) <= L (1 + r).
struct Modulus {
  enum class Kind { Power, Linear, Tabulated };

  Kind kind = Kind::Linear;
  double alpha = 1.0;  // Power only
  double c = 0.0;      // Power and Linear
  std::vector<std::pair<double, double>> table;  // Tabulated: (r, phi(r)), r increasing from 0
  double growth_L = 0.0;

  static Modulus power(double alpha, double c, double growth_L);
  static Modulus linear(double c, double growth_L);
  static Modulus tabulated(std::vector<std::pair<double, double>> points, double growth_L);

  /// Checks parameters and the sampled modulus axioms; throws InvalidArgument.
  void validate() const;

  /// phi(r); throws InvalidArgument for r < 0.
  double operator()(double r) const;
};

inline double modulus_eval(const Modulus& m, double r) { return m(r); }

/// Generator phi(t, x, y, z) with its declared regularity metadata.
struct ScalarGenerator {
  Expr body;
  double lip_y = 0.0;   // Lipschitz constant in y
  Modulus modulus_z;    // modulus of continuity in z
  double growth_L = 0.0;

  double operator()(double t, double x, double y, double z) const { return body(Env{t, x, y, z}); }
  bool depends_on_z() const { return body.depends_on(Var::Z); }

  /// The generator that is identically `value`.
  static ScalarGenerator constant(double value);

  /// Samples the declared growth constant plus the y and z regularity on a
  /// deterministic panel with x in [x_lo, x_hi] and t in [0, t_hi]. Throws
  /// InvalidArgument naming a witness point on the first violation.
  void check_metadata(double x_lo, double x_hi, double t_hi, unsigned samples = 2000) const;
};

/// R = 2 L (1 + |y| + |z|) / (n - L): every minimizer of q -> phi(q) + n|z - q|
/// lies within R of z. Requires n > L.
double search_radius(double L, double n, double y, double z);

/// Grid error of a search with spacing `step`: phi(step) + n step.
double envelope_grid_error(const Modulus& m, double n, double step);

/// Default search spacing min(1e-3, R / 1000).
double default_envelope_step(double radius);

/// Raw inf-convolution inf_q { gen(t, x, y, q) + n |z - q| } by grid search
/// over [z - R, z + R]. Overestimates the true infimum by at most
/// envelope_grid_error. step <= 0 selects the default spacing.
double lower_envelope(const ScalarGenerator& gen, double n, double t, double x, double y, double z,
                      double step = 0.0);

/// Raw sup-convolution sup_q { gen(t, x, y, q) - n |z - q| }; mirror of
/// lower_envelope.
double upper_envelope(const ScalarGenerator& gen, double n, double t, double x, double y, double z,
                      double step = 0.0);

/// phi(2L / (n - L)), the pointwise distance between a generator and either
/// of its level-n envelopes.
double envelope_gap_bound(const Modulus& m, double L, double n);

// ---------------------------------------------------------------------------
// Tabulated z-profiles

/// Symmetric lattice on [-z_max, z_max], spacing h_min + rel |z| (fine near
/// z = 0, where moduli such as |z|^alpha have their kink).
class ZLattice {
 public:
  static std::shared_ptr<const ZLattice> graded(double z_max, double h_min = 1e-8, double rel = 2e-4);

  std::size_t size() const { return nodes_.size(); }
  double node(std::size_t j) const { return nodes_[j]; }
  const std::vector<double>& nodes() const { return nodes_; }
  double z_max() const { return nodes_.back(); }
  /// Largest spacing on [-z, z].
  double spacing_at(double z) const { return h_min_ + rel_ * std::abs(z); }

  /// Cell index j with node(j) <= z < node(j + 1), clamped to [0, size - 2].
  std::size_t locate(double z) const;

 private:
  ZLattice() = default;
  std::vector<double> nodes_;
  double h_min_ = 0.0;
  double rel_ = 0.0;
  double scale_ = 0.0;  // h_min / rel
  double log_ratio_ = 0.0;
  std::size_t half_ = 0;
};

/// Piecewise-linear function of z on a ZLattice, extended linearly beyond the
/// end nodes. Supports O(log N) range extrema for the Godunov flux.
class ZProfile {
 public:
  ZProfile() = default;
  ZProfile(std::shared_ptr<const ZLattice> lattice, std::vector<double> values);

  static ZProfile sample(std::shared_ptr<const ZLattice> lattice, const std::function<double(double)>& f);

  double operator()(double z) const;
  double max_on(double a, double b) const;
  double min_on(double a, double b) const;

  /// Godunov numerical flux: max over [za, zb] when za <= zb, min over
  /// [zb, za] otherwise. Nonincreasing in za and nondecreasing in zb.
  double godunov(double za, double zb) const {
    return za <= zb ? max_on(za, zb) : min_on(zb, za);
  }

  /// Discrete inf/sup-convolution with n|z - q| over the lattice nodes.
  ZProfile lower_envelope(double n) const;
  ZProfile upper_envelope(double n) const;

  /// Largest slope magnitude between adjacent nodes.
  double lipschitz() const;

  const std::vector<double>& values() const { return values_; }
  const ZLattice& lattice() const { return *lattice_; }
  std::shared_ptr<const ZLattice> lattice_ptr() const { return lattice_; }

 private:
  void build_trees();
  double tree_query(const std::vector<double>& tree, std::size_t l, std::size_t r, bool want_max) const;

  std::shared_ptr<const ZLattice> lattice_;
  std::vector<double> values_;
  std::vector<double> max_tree_;
  std::vector<double> min_tree_;
};

}  // namespace gbsde

#pragma once

// The envelope ladder: Lipschitz approximations of a G-BSDE with a merely
// uniformly continuous generator, solved through the nonlinear Feynman-Kac
// PDE. Also hosts the pathwise (Y, Z, K) reconstruction and the comparison
// check built on top of those solves.

#include "gbsde/gsim.hpp"
#include "gbsde/pde.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gbsde {

/// C_G = 2 exp(L (1 + sigma_high_sq) T) / L.
double gap_constant(double L, const GParams& gp, double T);

/// Spatial grid plus the knobs forwarded to build_grid / make_lattice. The
/// time step is derived from the most demanding operator of a run.
struct GridSpec {
  double x_min = -4.0;
  double x_max = 4.0;
  std::size_t nx = 801;
  double core_fraction = 0.5;
  std::size_t max_stored_layers = 400;
  std::size_t max_steps = 20'000'000;
  LatticeSpec lattice;
};

/// Growth constant of the pair (f, g): the larger of the two.
double problem_growth(const PdeProblem& problem);

struct LevelReport {
  double n = 0.0;
  double gap = 0.0;           // max core |upper - lower| over stored layers
  double bound = 0.0;         // C_G phi(2L/(n-L)) + 2 solver_tol
  double generator_gap = 0.0; // envelope_gap_bound at this level
  bool pass = false;
};

struct LadderOptions {
  double solver_tol = 1e-3;
  bool barriers = true;
};

struct Ladder {
  std::vector<double> levels;
  double L = 0.0;
  double C_G = 0.0;
  double solver_tol = 0.0;
  SpaceTimeGrid grid;
  std::vector<PdeSolution> lower;
  std::vector<PdeSolution> upper;
  std::vector<LevelReport> gap_report;

  double sandwich_violation = 0.0;  // largest ordering violation, <= 0 when ordered
  bool sandwich_ok = false;
  bool gaps_decreasing = false;

  std::optional<PdeSolution> barrier_lower;
  std::optional<PdeSolution> barrier_upper;
  double barrier_violation = 0.0;
  bool barrier_ok = true;

  bool all_pass() const;
  std::string report_csv() const;
};

/// Solves the lower and upper envelope levels of `problem` on one shared grid.
Ladder approximation_ladder(const PdeProblem& problem, const std::vector<double>& levels, const GridSpec& spec,
                            const LadderOptions& options = {});

/// Default levels {2L, 4L, 8L, 16L, 32L}.
std::vector<double> default_levels(double L);

struct ExactOptions {
  double solver_tol = 1e-3;
  double max_level = 1e7;
  double force_level = 0.0;  // > 0 skips the level search
};

struct ExactSolution {
  PdeSolution solution;  // lower envelope solution
  PdeSolution upper;
  PdeSolution barrier_lower;
  PdeSolution barrier_upper;
  double n = 0.0;
  double L = 0.0;
  double C_G = 0.0;
  double predicted_gap = 0.0;  // C_G phi(2L/(n-L)), 0 when the envelopes coincide
  double measured_gap = 0.0;
  double target = 0.0;
  double solver_tol = 0.0;
};

/// Smallest integer level n > L whose certified gap C_G phi(2L/(n-L)) meets
/// `target`. Returns the level and the predicted gap.
std::pair<double, double> exact_level(const PdeProblem& problem, double target, double max_level = 1e7);

/// Solves at the level chosen by exact_level and certifies the measured core
/// gap against target + 2 solver_tol. Throws InvalidArgument for target <= 0
/// and SolverError when the target is out of reach on this grid.
ExactSolution solve_exact(const PdeProblem& problem, const GridSpec& spec, double target,
                          const ExactOptions& options = {});

/// (Y, Z, K) along an ensemble, row-major [path][record].
struct SolutionTriple {
  std::size_t n_paths = 0;
  std::vector<double> times;
  std::vector<double> Y, Z, K;

  std::size_t at(std::size_t path, std::size_t record) const { return path * times.size() + record; }
};

/// Y = u(t, X), Z = sigma grad u, and
///   K_t = Y_t - Y_0 + sum f dt + sum g d<B> - sum Z dB
/// with left-point sums over the recorded times.
SolutionTriple extract_triple(const PdeSolution& sol, const PathEnsemble& ens, const PdeProblem& problem);

/// Feedback variance worst_case_q(H(t, x)) with H assembled from the stored
/// layers of `sol`.
ControlPolicy worst_case_control(const PdeSolution& sol, const PdeProblem& problem);

struct KCheck {
  double tolerance_factor = 0.0;    // 5 (dx + sqrt(dt))
  double max_increase = 0.0;        // worst scaled positive increment of K
  double max_terminal = 0.0;        // worst scaled |K_T|
  double max_reference_error = 0.0; // worst scaled |K - reference|, when a reference is given
  bool nonincreasing = false;
  bool terminal_flat = false;
  bool matches_reference = true;
};

/// Pathwise K checks with tolerance 5 (dx + sqrt(dt)) (1 + max_t |Y_t|) per
/// path. `reference`, when given, is compared record by record.
KCheck check_k(const SolutionTriple& triple, const PdeSolution& sol, const PathEnsemble& ens,
               const std::vector<double>* reference = nullptr);

struct ComparisonReport {
  double n = 0.0;
  double min_difference = 0.0;  // min over core nodes and layers of u2 - u1
  double max_difference = 0.0;
  double tolerance = 0.0;       // gap1 + gap2 + 2 solver_tol
  double gap1 = 0.0;
  double gap2 = 0.0;
  bool pass = false;
  PdeSolution u1;
  PdeSolution u2;

  std::string report_csv() const;
};

/// Verifies the ordering hypotheses on grid samples (InvalidArgument with a
/// witness otherwise), solves both problems at a common level on one grid and
/// reports min (u2 - u1) over the core.
ComparisonReport compare(const PdeProblem& p1, const PdeProblem& p2, const GridSpec& spec, double target = 0.05,
                         const ExactOptions& options = {});

}  // namespace gbsde

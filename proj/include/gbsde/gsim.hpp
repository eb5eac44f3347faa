#pragma once

// Path simulation of G-Brownian motion under explicit volatility controls.
//
// Each control law picks one measure from the representing family; Gaussian
// increments are drawn from a counter-based generator keyed by
// (seed, path, step), so an ensemble does not depend on thread count.

#include "gbsde/expr.hpp"
#include "gbsde/gfunction.hpp"
#include "gbsde/pde.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gbsde {

/// Instantaneous variance as a function of (t, state). The state is X when
/// the forward equation is simulated jointly and B otherwise.
class ControlPolicy {
 public:
  enum class Kind { Constant, Feedback };

  static ControlPolicy constant(double variance);
  static ControlPolicy feedback(std::function<double(double, double)> rule, std::string label);

  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }

  /// Raw rule value clamped into [sigma_low_sq, sigma_high_sq].
  double variance(const GParams& gp, double t, double state) const;

 private:
  Kind kind_ = Kind::Constant;
  double constant_ = 1.0;
  std::function<double(double, double)> rule_;
  std::string label_;
};

/// Standard normal for (seed, path, step); pure function of its arguments.
double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step);

struct SimOptions {
  std::size_t record_stride = 1;             // 0 keeps only the endpoints
  const CoefficientSet* forward = nullptr;   // simulate X jointly when set
  double x0 = 0.0;
};

/// Recorded paths, stored row-major as [path][record].
struct PathEnsemble {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  double t0 = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::size_t record_stride = 1;
  double x0 = 0.0;
  std::string policy;
  std::vector<double> times;  // recorded times
  std::vector<std::size_t> steps;  // step index of each record
  std::vector<double> B, QV, X, control;

  std::size_t n_records() const { return times.size(); }
  bool has_x() const { return !X.empty(); }
  std::size_t at(std::size_t path, std::size_t record) const { return path * times.size() + record; }
  double terminal_b(std::size_t path) const { return B[at(path, times.size() - 1)]; }
  double terminal_x(std::size_t path) const { return X[at(path, times.size() - 1)]; }
};

/// Simulates n_paths paths on [t0, T] with step dt. The variance of step k
/// is the policy value at the start of the step; dB = sqrt(q dt) xi and
/// d<B> = q dt. Throws InvalidArgument when dt does not divide T - t0.
PathEnsemble simulate_paths(const ControlPolicy& policy, const GParams& gp, double t0, double T, double dt,
                            std::size_t n_paths, std::uint64_t seed, const SimOptions& options = {});

/// Euler scheme dX = b dt + h d<B> + sigma dB driven by a fully recorded
/// ensemble; fills ens.X with X(t0) = x0.
void euler_forward(const CoefficientSet& coeffs, PathEnsemble& ens, double x0, double t0);

struct PolicyEstimate {
  std::string policy;
  double mean = 0.0;
  double se = 0.0;
};

struct UpperExpectation {
  double value = 0.0;       // max over policies of the sample mean
  double se = 0.0;          // standard error of the maximizing policy
  std::size_t argmax = 0;
  std::vector<PolicyEstimate> per_policy;
};

/// Monte Carlo lower bound for the upper expectation of payoff(X_T) (or
/// payoff(B_T) for ensembles without X) over a finite policy set.
UpperExpectation upper_expectation_mc(const Expr& payoff, const std::vector<PathEnsemble>& ensembles);

struct GHeatGrid {
  double x_min = -4.0;
  double x_max = 4.0;
  std::size_t nx = 801;
};

/// Ê[payoff(B_T)] from the G-heat equation (b = h = f = g = 0, sigma = 1).
double upper_expectation_pde(const Expr& payoff, const GParams& gp, double T, const GHeatGrid& grid = {});

/// CSV with one row per path per recorded time.
std::string ensemble_to_csv(const PathEnsemble& ens);

/// JSON sidecar recording seed, policy and sizes.
std::string ensemble_sidecar(const PathEnsemble& ens);

/// Worker count: GBSDE_THREADS when set and positive, else the hardware
/// concurrency.
unsigned worker_count();

/// Runs body(begin, end) over [0, n) in contiguous chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace gbsde

#pragma once

// Batch front door: JSON run configs and the named experiments.

#include "gbsde/gbsde.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gbsde {

struct McConfig {
  std::size_t n_paths = 10'000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  std::vector<std::string> policies{"low", "high"};  // "low", "high", "feedback" or a variance
  double x0 = 0.0;
  double se_multiplier = 3.0;
  double dominance_slack = 5e-3;
  double feedback_slack = 1e-2;
};

struct RunConfig {
  ConstantTable constants;
  PdeProblem problem;
  std::optional<PdeProblem> problem2;
  GridSpec grid;
  std::vector<double> levels;  // empty selects the defaults
  double solver_tol = 1e-3;
  double target_gap = 0.05;
  McConfig mc;
  std::optional<Expr> reference;  // closed form u(t, x) for the golden experiment
  double reference_tol = 0.05;
  std::size_t envelope_samples = 2000;
  std::string experiment;
  std::string output_dir = "out";
};

/// Parses and validates a config. Errors are ConfigError carrying the JSON
/// pointer of the offending field.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Experiment names accepted by run().
const std::vector<std::string>& experiment_names();

/// Runs `experiment`, writes summary.json and CSV tables into
/// config.output_dir, and returns 0 when every certified bound holds, 1 when
/// some bound fails and 2 on errors.
int run(const RunConfig& config, const std::string& experiment, std::ostream& log);

}  // namespace gbsde

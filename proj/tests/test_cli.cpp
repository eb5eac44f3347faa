#include "gbsde/cli.hpp"
#include "gbsde/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gbsde;
namespace fs = std::filesystem;

namespace {

std::string pointer_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.pointer();
  }
  return "<no error>";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kMinimal = R"({
  "gparams": {"sigma_low_sq": 0.5, "sigma_high_sq": 1.0},
  "problem": {"Phi": "x*x", "f": "0", "g": "0"}
})";

}  // namespace

TEST_CASE("minimal config") {
  const RunConfig cfg = parse_config(kMinimal);
  CHECK(cfg.problem.T == 1.0);
  CHECK(cfg.problem.gparams.sigma_high_sq == 1.0);
  CHECK(cfg.problem.coeffs.Phi(Env{0, 3, 0, 0}) == 9.0);
  CHECK(cfg.grid.nx == 801);
  CHECK(cfg.levels.empty());
  CHECK(cfg.mc.policies == std::vector<std::string>{"low", "high"});
}

TEST_CASE("config errors carry a JSON pointer") {
  CHECK(pointer_of(R"({"gparams": {"sigma_low_sq": 0.5}, "problem": {"Phi": "x"}})") == "/gparams/sigma_high_sq");
  CHECK(pointer_of(R"({"gparams": {"sigma_low_sq": 2, "sigma_high_sq": 1}, "problem": {"Phi": "x"}})") == "/gparams");
  CHECK(pointer_of(R"({"gparams": {"sigma_low_sq": 0.5, "sigma_high_sq": 1}})") == "/problem");
  CHECK(pointer_of(R"({"gparams": {"sigma_low_sq": 0.5, "sigma_high_sq": 1}, "problem": {"Phi": "x +"}})") ==
        "/problem/Phi");
  CHECK(pointer_of(R"({"gparams": {"sigma_low_sq": 0.5, "sigma_high_sq": 1}, "problem": {"Phi": "x"},
                       "grid": {"nx": 2}})") == "/grid/nx");
  CHECK(pointer_of(R"({"gparams": {"sigma_low_sq": 0.5, "sigma_high_sq": 1}, "problem": {"Phi": "x"},
                       "ladder": {"levels": [4, "eight"]}})") == "/ladder/levels/1");
  CHECK(pointer_of(R"({"gparams": {"sigma_low_sq": 0.5, "sigma_high_sq": 1}, "problem": {"Phi": "x"},
                       "mc": {"dt": 0}})") == "/mc/dt");
  CHECK(pointer_of("[1, 2") == "");
}

TEST_CASE("golden config") {
  const RunConfig cfg = load_config(std::string(GBSDE_CONFIG_DIR) + "/golden.json");
  const auto& f = cfg.problem.f;
  CHECK(f(0, 0, 0, 1.0) == doctest::Approx(-2.5));
  CHECK(f.growth_L == 2.5);
  CHECK(cfg.reference.has_value());
  CHECK(cfg.levels == std::vector<double>{4, 8, 16, 32});
}

TEST_CASE("shipped configs load") {
  for (const char* name : {"gheat.json", "golden.json", "kcheck.json", "pair.json"}) {
    INFO(name);
    CHECK_NOTHROW(load_config(std::string(GBSDE_CONFIG_DIR) + "/" + name));
  }
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("runs are byte-identical and report through the exit code") {
  RunConfig cfg = parse_config(R"({
    "gparams": {"sigma_low_sq": 0.5, "sigma_high_sq": 1.0},
    "problem": {"T": 0.5, "Phi": "x*x", "lip_const": 2, "growth_q": 1},
    "grid": {"x_min": -4, "x_max": 4, "nx": 161},
    "mc": {"n_paths": 2000, "dt": 0.01, "seed": 3, "policies": ["low", "high", "feedback"]}
  })");
  const fs::path root = fs::temp_directory_path() / "gbsde_test_cli";
  fs::remove_all(root);
  std::ostringstream log;
  cfg.output_dir = (root / "a").string();
  CHECK(run(cfg, "upper-expectation", log) == 0);
  cfg.output_dir = (root / "b").string();
  CHECK(run(cfg, "upper-expectation", log) == 0);
  for (const char* file : {"summary.json", "upper_expectation.csv", "paths_sidecar.json"}) {
    INFO(file);
    const std::string a = slurp(root / "a" / file);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(root / "b" / file));
  }
  CHECK(slurp(root / "a" / "upper_expectation.csv").rfind("# g-bsde-lab schema v1\n", 0) == 0);

  cfg.output_dir = (root / "c").string();
  std::ostringstream err;
  CHECK(run(cfg, "golden", err) == 2);
  CHECK(err.str().find("reference") != std::string::npos);
  fs::remove_all(root);
}

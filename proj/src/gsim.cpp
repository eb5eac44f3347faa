#include "gbsde/gsim.hpp"

#include "gbsde/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <thread>

namespace gbsde {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform on the open interval (0, 1).
double open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ControlPolicy ControlPolicy::constant(double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InvalidArgument("ControlPolicy: constant variance must be positive and finite");
  }
  ControlPolicy p;
  p.kind_ = Kind::Constant;
  p.constant_ = variance;
  p.label_ = "constant(" + num(variance) + ")";
  return p;
}

ControlPolicy ControlPolicy::feedback(std::function<double(double, double)> rule, std::string label) {
  if (!rule) throw InvalidArgument("ControlPolicy: feedback rule is empty");
  ControlPolicy p;
  p.kind_ = Kind::Feedback;
  p.rule_ = std::move(rule);
  p.label_ = "feedback(" + label + ")";
  return p;
}

double ControlPolicy::variance(const GParams& gp, double t, double state) const {
  const double raw = kind_ == Kind::Constant ? constant_ : rule_(t, state);
  if (std::isnan(raw)) throw EvalError("ControlPolicy: rule returned NaN");
  return std::clamp(raw, gp.sigma_low_sq, gp.sigma_high_sq);
}

double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step) {
  const std::uint64_t key = splitmix(splitmix(seed) ^ splitmix(path * 0x2545f4914f6cdd1dULL + 1) ^ step);
  const double u1 = open_unit(splitmix(key));
  const double u2 = open_unit(splitmix(key ^ 0xd1b54a32d192ed03ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

unsigned worker_count() {
  if (const char* env = std::getenv("GBSDE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    if (n > 0) body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, w, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

PathEnsemble simulate_paths(const ControlPolicy& policy, const GParams& gp, double t0, double T, double dt,
                            std::size_t n_paths, std::uint64_t seed, const SimOptions& options) {
  gp.validate();
  if (n_paths == 0) throw InvalidArgument("simulate_paths: n_paths must be >= 1");
  if (!(dt > 0.0) || !(T > t0)) throw InvalidArgument("simulate_paths: need dt > 0 and T > t0");
  const double ratio = (T - t0) / dt;
  const double steps_d = std::round(ratio);
  if (steps_d < 1.0 || std::abs(ratio - steps_d) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream os;
    os << "simulate_paths: dt=" << dt << " does not divide T - t0 = " << (T - t0);
    throw InvalidArgument(os.str());
  }
  PathEnsemble ens;
  ens.n_paths = n_paths;
  ens.n_steps = static_cast<std::size_t>(steps_d);
  ens.t0 = t0;
  ens.dt = (T - t0) / steps_d;
  ens.seed = seed;
  ens.record_stride = options.record_stride == 0 ? ens.n_steps : options.record_stride;
  ens.x0 = options.x0;
  ens.policy = policy.label();
  for (std::size_t k = 0; k <= ens.n_steps; ++k) {
    if (k % ens.record_stride == 0 || k == ens.n_steps) {
      ens.steps.push_back(k);
      ens.times.push_back(k == ens.n_steps ? T : t0 + ens.dt * static_cast<double>(k));
    }
  }
  const std::size_t nr = ens.times.size();
  ens.B.assign(n_paths * nr, 0.0);
  ens.QV.assign(n_paths * nr, 0.0);
  ens.control.assign(n_paths * nr, 0.0);
  const CoefficientSet* fwd = options.forward;
  if (fwd) ens.X.assign(n_paths * nr, 0.0);
  const double sdt = std::sqrt(ens.dt);

  parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      double b = 0.0, qv = 0.0, x = options.x0;
      std::size_t r = 0;
      for (std::size_t k = 0;; ++k) {
        const double t = t0 + ens.dt * static_cast<double>(k);
        const double q = policy.variance(gp, std::min(t, T), fwd ? x : b);
        if (r < nr && ens.steps[r] == k) {
          const std::size_t idx = ens.at(p, r);
          ens.B[idx] = b;
          ens.QV[idx] = qv;
          ens.control[idx] = q;
          if (fwd) ens.X[idx] = x;
          ++r;
        }
        if (k == ens.n_steps) break;
        const double db = std::sqrt(q) * sdt * counter_normal(seed, p, k);
        const double dqv = q * ens.dt;
        if (fwd) {
          const Env env{t, x, 0, 0};
          x += fwd->b(env) * ens.dt + fwd->h(env) * dqv + fwd->sigma(env) * db;
        }
        b += db;
        qv += dqv;
      }
    }
  });
  return ens;
}

void euler_forward(const CoefficientSet& coeffs, PathEnsemble& ens, double x0, double t0) {
  if (ens.record_stride != 1 || ens.n_records() != ens.n_steps + 1) {
    throw InvalidArgument("euler_forward: ensemble must record every step");
  }
  if (std::abs(t0 - ens.t0) > 1e-12) throw InvalidArgument("euler_forward: t0 does not match the ensemble");
  const std::size_t nr = ens.n_records();
  ens.X.assign(ens.n_paths * nr, 0.0);
  ens.x0 = x0;
  parallel_for(ens.n_paths, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      double x = x0;
      ens.X[ens.at(p, 0)] = x;
      for (std::size_t k = 0; k + 1 < nr; ++k) {
        const Env env{ens.times[k], x, 0, 0};
        const double db = ens.B[ens.at(p, k + 1)] - ens.B[ens.at(p, k)];
        const double dqv = ens.QV[ens.at(p, k + 1)] - ens.QV[ens.at(p, k)];
        x += coeffs.b(env) * ens.dt + coeffs.h(env) * dqv + coeffs.sigma(env) * db;
        ens.X[ens.at(p, k + 1)] = x;
      }
    }
  });
}

UpperExpectation upper_expectation_mc(const Expr& payoff, const std::vector<PathEnsemble>& ensembles) {
  if (ensembles.empty()) throw InvalidArgument("upper_expectation_mc: at least one policy is required");
  UpperExpectation out;
  for (const auto& ens : ensembles) {
    std::vector<double> vals(ens.n_paths);
    const double tT = ens.times.back();
    parallel_for(ens.n_paths, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t p = lo; p < hi; ++p) {
        const double s = ens.has_x() ? ens.terminal_x(p) : ens.terminal_b(p);
        vals[p] = payoff(Env{tT, s, 0, 0});
      }
    });
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double n = static_cast<double>(vals.size());
    const double se = vals.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    out.per_policy.push_back({ens.policy, mean, se});
  }
  for (std::size_t i = 1; i < out.per_policy.size(); ++i) {
    if (out.per_policy[i].mean > out.per_policy[out.argmax].mean) out.argmax = i;
  }
  out.value = out.per_policy[out.argmax].mean;
  out.se = out.per_policy[out.argmax].se;
  return out;
}

double upper_expectation_pde(const Expr& payoff, const GParams& gp, double T, const GHeatGrid& grid) {
  PdeProblem problem;
  problem.coeffs.Phi = payoff;
  problem.gparams = gp;
  problem.T = T;
  const SpaceTimeGrid g = build_grid(problem, grid.x_min, grid.x_max, grid.nx);
  return solve(problem, g).eval_u(0.0, 0.0);
}

std::string ensemble_to_csv(const PathEnsemble& ens) {
  std::string out = "# g-bsde-lab schema v1\npath,t,B,QV,X,control\n";
  for (std::size_t p = 0; p < ens.n_paths; ++p) {
    for (std::size_t r = 0; r < ens.n_records(); ++r) {
      const std::size_t i = ens.at(p, r);
      out += std::to_string(p) + ',' + num(ens.times[r]) + ',' + num(ens.B[i]) + ',' + num(ens.QV[i]) + ',' +
             (ens.has_x() ? num(ens.X[i]) : std::string()) + ',' + num(ens.control[i]) + '\n';
    }
  }
  return out;
}

std::string ensemble_sidecar(const PathEnsemble& ens) {
  nlohmann::ordered_json j;
  j["schema"] = "g-bsde-lab schema v1";
  j["seed"] = ens.seed;
  j["policy"] = ens.policy;
  j["n_paths"] = ens.n_paths;
  j["n_steps"] = ens.n_steps;
  j["t0"] = ens.t0;
  j["dt"] = ens.dt;
  j["record_stride"] = ens.record_stride;
  j["x0"] = ens.x0;
  j["has_x"] = ens.has_x();
  return j.dump(2) + "\n";
}

}  // namespace gbsde

#include "gbsde/cli.hpp"
#include "gbsde/error.hpp"
#include "gbsde/gbsde.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace gbsde;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict solution_dict(const PdeSolution& sol) {
  const auto& g = sol.grid();
  std::vector<double> xs(g.nx);
  for (std::size_t i = 0; i < g.nx; ++i) xs[i] = g.x(i);
  py::dict d;
  d["x"] = to_array(xs);
  d["t"] = to_array(sol.times());
  d["u0"] = to_array(sol.initial());
  d["dt"] = g.dt;
  d["nt"] = g.nt;
  d["fingerprint"] = sol.fingerprint();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "G-BSDE envelope ladder, PDE solver and Monte Carlo tools";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<EvalError>(m, "EvalError", PyExc_ArithmeticError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<GParams>(m, "GParams")
      .def(py::init(&GParams::make), py::arg("sigma_low_sq"), py::arg("sigma_high_sq"))
      .def_readonly("sigma_low_sq", &GParams::sigma_low_sq)
      .def_readonly("sigma_high_sq", &GParams::sigma_high_sq)
      .def("__repr__", [](const GParams& p) {
        std::ostringstream os;
        os << "GParams(" << p.sigma_low_sq << ", " << p.sigma_high_sq << ")";
        return os.str();
      });

  m.def("g_value", &g_value, py::arg("params"), py::arg("a"));
  m.def("worst_case_q", &worst_case_q, py::arg("params"), py::arg("a"));
  m.def(
      "g_value_matrix",
      [](const std::vector<Eigen::MatrixXd>& gamma, const Eigen::MatrixXd& a) {
        return g_value_matrix(GammaSet(gamma), a);
      },
      py::arg("gamma"), py::arg("a"));

  py::class_<Expr>(m, "Expr")
      .def(
          "__call__", [](const Expr& e, double t, double x, double y, double z) { return e(Env{t, x, y, z}); },
          py::arg("t") = 0.0, py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("z") = 0.0)
      .def("__str__", &Expr::to_string)
      .def("structurally_equal", &Expr::structurally_equal);
  m.def(
      "parse", [](const std::string& text, const std::map<std::string, double>& constants) {
        ConstantTable table(constants.begin(), constants.end());
        return parse(text, table);
      },
      py::arg("text"), py::arg("constants") = std::map<std::string, double>{});

  py::class_<Modulus>(m, "Modulus")
      .def_static("power", &Modulus::power, py::arg("alpha"), py::arg("c"), py::arg("growth_L"))
      .def_static("linear", &Modulus::linear, py::arg("c"), py::arg("growth_L"))
      .def("__call__", &Modulus::operator());

  m.def("search_radius", &search_radius, py::arg("L"), py::arg("n"), py::arg("y"), py::arg("z"));
  m.def("envelope_gap_bound", &envelope_gap_bound, py::arg("modulus"), py::arg("L"), py::arg("n"));
  m.def(
      "lower_envelope",
      [](const std::string& body, const Modulus& mod, double n, double z, double y, double step) {
        ScalarGenerator gen{parse(body), 0.0, mod, mod.growth_L};
        return lower_envelope(gen, n, 0.0, 0.0, y, z, step);
      },
      py::arg("body"), py::arg("modulus"), py::arg("n"), py::arg("z"), py::arg("y") = 0.0, py::arg("step") = 0.0);
  m.def(
      "upper_envelope",
      [](const std::string& body, const Modulus& mod, double n, double z, double y, double step) {
        ScalarGenerator gen{parse(body), 0.0, mod, mod.growth_L};
        return upper_envelope(gen, n, 0.0, 0.0, y, z, step);
      },
      py::arg("body"), py::arg("modulus"), py::arg("n"), py::arg("z"), py::arg("y") = 0.0, py::arg("step") = 0.0);

  m.def("gap_constant", &gap_constant, py::arg("L"), py::arg("params"), py::arg("T"));

  m.def(
      "upper_expectation_pde",
      [](const std::string& payoff, const GParams& gp, double T, double x_min, double x_max, std::size_t nx) {
        py::gil_scoped_release release;
        return upper_expectation_pde(parse(payoff), gp, T, GHeatGrid{x_min, x_max, nx});
      },
      py::arg("payoff"), py::arg("params"), py::arg("T") = 1.0, py::arg("x_min") = -4.0, py::arg("x_max") = 4.0,
      py::arg("nx") = 801);

  m.def(
      "simulate_terminal",
      [](double variance, const GParams& gp, double T, double dt, std::size_t n_paths, std::uint64_t seed) {
        SimOptions opts;
        opts.record_stride = 0;
        PathEnsemble ens;
        {
          py::gil_scoped_release release;
          ens = simulate_paths(ControlPolicy::constant(variance), gp, 0.0, T, dt, n_paths, seed, opts);
        }
        std::vector<double> b(n_paths), qv(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p) {
          b[p] = ens.terminal_b(p);
          qv[p] = ens.QV[ens.at(p, ens.n_records() - 1)];
        }
        return py::make_tuple(to_array(b), to_array(qv));
      },
      py::arg("variance"), py::arg("params"), py::arg("T"), py::arg("dt"), py::arg("n_paths"), py::arg("seed"),
      "Terminal (B_T, <B>_T) under a constant variance control.");

  m.def(
      "solve_config",
      [](const std::string& config_text, double target) {
        const RunConfig cfg = parse_config(config_text);
        const double tgt = target > 0.0 ? target : cfg.target_gap;
        ExactOptions opts;
        opts.solver_tol = cfg.solver_tol;
        std::optional<ExactSolution> ex;
        {
          py::gil_scoped_release release;
          ex.emplace(solve_exact(cfg.problem, cfg.grid, tgt, opts));
        }
        py::dict d = solution_dict(ex->solution);
        d["level"] = ex->n;
        d["measured_gap"] = ex->measured_gap;
        d["predicted_gap"] = ex->predicted_gap;
        return d;
      },
      py::arg("config_text"), py::arg("target") = 0.0,
      "Solve the problem of a JSON config through the envelope ladder.");

  m.def(
      "run",
      [](const std::string& config_path, const std::string& experiment, const std::string& out_dir) {
        RunConfig cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        std::ostringstream log;
        int code;
        {
          py::gil_scoped_release release;
          code = run(cfg, experiment, log);
        }
        return py::make_tuple(code, log.str());
      },
      py::arg("config_path"), py::arg("experiment"), py::arg("out_dir") = "");

  m.def("experiment_names", &experiment_names);
}

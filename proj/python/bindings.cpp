#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "misspec/bounds.hpp"
#include "misspec/errors.hpp"
#include "misspec/experiment.hpp"
#include "misspec/geometry.hpp"
#include "misspec/schedules.hpp"

namespace py = pybind11;
using namespace misspec;

namespace {

py::dict summary_dict(const RunSummary& s) {
  py::dict d;
  d["id"] = s.id;
  d["problem"] = s.problem;
  d["scheme"] = s.scheme;
  d["K"] = s.K;
  d["iterations"] = s.iterations;
  d["ok"] = s.ok;
  d["error"] = s.error;
  d["theta_err"] = s.theta_err;
  d["x_err"] = s.x_err;
  d["f_gap"] = s.f_gap;
  d["avg_gap"] = s.avg_gap;
  d["vi_gap"] = s.vi_gap;
  d["bound"] = s.bound;
  d["wall_seconds"] = s.wall_seconds;
  return d;
}

// Trace columns as lists; missing values become None.
py::dict trace_dict(const SolveTrace& t) {
  py::list k, theta_err, x_err, f_gap, vi_gap, bound, avg_gap, gamma_f, gamma_g, epsilon;
  for (const auto& r : t.records) {
    k.append(r.k);
    theta_err.append(r.theta_err);
    x_err.append(r.x_err);
    f_gap.append(r.f_gap);
    vi_gap.append(r.vi_gap);
    bound.append(r.bound);
    avg_gap.append(r.avg_gap);
    gamma_f.append(r.gamma_f);
    gamma_g.append(r.gamma_g);
    epsilon.append(r.epsilon);
  }
  py::dict d;
  d["k"] = k;
  d["theta_err"] = theta_err;
  d["x_err"] = x_err;
  d["f_gap"] = f_gap;
  d["vi_gap"] = vi_gap;
  d["bound"] = bound;
  d["avg_gap"] = avg_gap;
  d["gamma_f"] = gamma_f;
  d["gamma_g"] = gamma_g;
  d["epsilon"] = epsilon;
  if (!t.records.empty()) {
    d["x_final"] = t.final().x;
    d["theta_final"] = t.final().theta;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint learning-and-optimization schemes for misspecified problems";

  py::register_exception<InadmissibleParameter>(m, "InadmissibleParameter", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<FeasibleSet>(m, "FeasibleSet")
      .def_static("box", &FeasibleSet::box, py::arg("lower"), py::arg("upper"))
      .def_static("whole_space", &FeasibleSet::whole_space, py::arg("dim"))
      .def_static("nonneg_orthant", &FeasibleSet::nonneg_orthant, py::arg("dim"))
      .def_static(
          "polyhedron",
          [](Mat A, Vec b, Vec lower, Vec upper) {
            return FeasibleSet::polyhedron(std::move(A), std::move(b), std::move(lower), std::move(upper));
          },
          py::arg("A"), py::arg("b"), py::arg("lower"), py::arg("upper"),
          "{x : A x >= b, lower <= x <= upper}, projected with Dykstra's algorithm")
      .def("project", &FeasibleSet::project, py::arg("x"))
      .def("residual", &FeasibleSet::residual, py::arg("x"))
      .def("contains", &FeasibleSet::contains, py::arg("x"), py::arg("tol") = 1e-9)
      .def_property_readonly("dim", &FeasibleSet::dim)
      .def_property_readonly("diameter_bound", &FeasibleSet::diameter_bound)
      .def_property_readonly("bounded", &FeasibleSet::bounded);

  m.def("contraction_factor", &contraction_factor, py::arg("gamma"), py::arg("eta"), py::arg("G"));
  m.def("extragradient_step_bound", &extragradient_step_bound, py::arg("L_Fx"), py::arg("L_Ftheta"),
        py::arg("theta_gap"));
  m.def(
      "tikhonov_step",
      [](double L_Fx, double alpha, double beta, long k) {
        const auto s = TikhonovSchedule(L_Fx, alpha, beta).at(k);
        return py::make_tuple(s.gamma, s.epsilon);
      },
      py::arg("L_Fx"), py::arg("alpha"), py::arg("beta"), py::arg("k"), "(gamma_k, epsilon_k) of the regularized scheme");

  m.def(
      "strongly_convex_bound",
      [](long k, double gamma_f, double eta_f, double G_fx, double gamma_g, double eta_g, double G_g, double L_theta,
         double x0_err, double theta0_err) {
        return strongly_convex_bound(k, {gamma_f, eta_f, G_fx, gamma_g, eta_g, G_g, L_theta}, x0_err, theta0_err);
      },
      py::arg("k"), py::arg("gamma_f"), py::arg("eta_f"), py::arg("G_fx"), py::arg("gamma_g"), py::arg("eta_g"),
      py::arg("G_g"), py::arg("L_theta"), py::arg("x0_err"), py::arg("theta0_err"));
  m.def("learning_bound", &learning_bound, py::arg("k"), py::arg("gamma_g"), py::arg("eta_g"), py::arg("G_g"),
        py::arg("theta0_err"));
  m.def("averaging_bound", &averaging_bound, py::arg("K"), py::arg("gamma_f"), py::arg("x0_err"),
        py::arg("theta0_err"), py::arg("C"), py::arg("G_ftheta"), py::arg("L_ftheta"), py::arg("q_g"));
  m.def("subgradient_bound", &subgradient_bound, py::arg("K"), py::arg("M"), py::arg("x0_err"), py::arg("theta0_err"),
        py::arg("L_ftheta"), py::arg("q_g"));

  m.def(
      "run_config",
      [](const std::string& text, std::optional<long> seed, std::optional<std::filesystem::path> output) {
        ConfigTable table = ConfigTable::parse_string(text, "<config>");
        if (seed) table.set("experiment.seed", std::to_string(*seed));
        ExperimentConfig config = load_config(table);
        if (output) config.output = *output;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(config);
        }
        return py::make_tuple(summary_dict(r.summary), trace_dict(r.trace));
      },
      py::arg("text"), py::arg("seed") = py::none(), py::arg("output") = py::none(),
      "Run one experiment from INI text; returns (summary, trace) dictionaries");
  m.def(
      "run_config_file",
      [](const std::filesystem::path& path, std::optional<std::filesystem::path> output) {
        ExperimentConfig config = load_config_file(path);
        if (output) config.output = *output;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(config);
        }
        return py::make_tuple(summary_dict(r.summary), trace_dict(r.trace));
      },
      py::arg("path"), py::arg("output") = py::none());
}

#include "gpsq/cli.hpp"
#include "gpsq/io.hpp"
#include "gpsq/model_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace gpsq;

namespace {

Matrix rows_apply(const BenchmarkSystem& sys, const Matrix& X, Vector (BenchmarkSystem::*fn)(const State&) const) {
  if (X.cols() != sys.layout.dim()) throw DomainError("expected " + std::to_string(sys.layout.dim()) + " input columns");
  Matrix out(X.rows(), sys.layout.n);
  for (Eigen::Index k = 0; k < X.rows(); ++k) out.row(k) = (sys.*fn)(sys.layout.state(X.row(k))).transpose();
  return out;
}

py::tuple prediction(const Prediction& p) { return py::make_tuple(p.mean, p.var); }

Covariance covariance_mode(bool with_var) { return with_var ? Covariance::marginal : Covariance::none; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Constrained Gaussian process dynamics models";
  m.attr("__version__") = kVersion;

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "projection_ops",
      [](const Matrix& M, const Matrix& A) {
        const Projection p = projection_ops(M, A);
        return py::make_tuple(p.L, p.T);
      },
      py::arg("M"), py::arg("A"), "L = M^-1 A^T (A M^-1 A^T)^+ and T = I - L A.");

  py::class_<BenchmarkSystem>(m, "System")
      .def_readonly("name", &BenchmarkSystem::name)
      .def_property_readonly("n", [](const BenchmarkSystem& s) { return s.layout.n; })
      .def_property_readonly("n_u", [](const BenchmarkSystem& s) { return s.layout.n_u; })
      .def_property_readonly("input_dim", [](const BenchmarkSystem& s) { return s.layout.dim(); })
      .def_property_readonly("theta_star", [](const BenchmarkSystem& s) { return s.theta_star(); })
      .def_readonly("theta_names", &BenchmarkSystem::theta_names)
      .def_property_readonly("columns", [](const BenchmarkSystem& s) { return dataset_columns(s.layout); })
      .def("acceleration", [](const BenchmarkSystem& s, const Matrix& X) { return rows_apply(s, X, &BenchmarkSystem::acceleration); },
           py::arg("X"), "Analytic constrained accelerations, one row per input row.")
      .def("abar", [](const BenchmarkSystem& s, const Matrix& X) { return rows_apply(s, X, &BenchmarkSystem::abar); },
           py::arg("X"), "Unconstrained accelerations a + z.")
      .def("constraint_error",
           [](const BenchmarkSystem& s, const Matrix& pred, const Matrix& X) {
             return max_constraint_error(pred, X, s.layout, s.constraint);
           },
           py::arg("pred"), py::arg("X"));

  m.def("system_names", &system_names);
  m.def("make_system", [](const std::string& name, const SystemOverrides& o) { return make_system(name, o); },
        py::arg("name"), py::arg("overrides") = SystemOverrides{});
  m.def("sample_inputs", &sample_constrained_inputs, py::arg("system"), py::arg("count"), py::arg("seed"));
  m.def("prediction_grid", &prediction_grid, py::arg("system"), py::arg("points_per_dim"));

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("X", &Dataset::X)
      .def_readonly("Y", &Dataset::Y)
      .def_readonly("sigma_y", &Dataset::sigma_y)
      .def_readonly("system_name", &Dataset::system_name)
      .def_readonly("seed", &Dataset::seed)
      .def_property_readonly("y_std", [](const Dataset& d) { return d.norm.y_std; })
      .def("__len__", [](const Dataset& d) { return d.size(); });
  m.def("make_dataset", &make_dataset, py::arg("system"), py::arg("count"), py::arg("sigma_y") = kDefaultSigmaY,
        py::arg("seed") = 0);
  m.def("save_dataset", &save_dataset, py::arg("data"), py::arg("path"), py::arg("config_hash") = "none");
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("rmse", [](const Matrix& pred, const Matrix& truth, const Dataset& d) { return rmse_normalized(pred, truth, d.norm); },
        py::arg("pred"), py::arg("truth"), py::arg("data"), "RMSE normalized by the training target std.");

  m.def("families", [] {
    std::vector<std::string> out;
    for (Family f : all_families()) out.push_back(family_name(f));
    return out;
  });

  py::class_<FittedModel>(m, "Model")
      .def_property_readonly("family", [](const FittedModel& f) { return family_name(f.family()); })
      .def_property_readonly("lml", &FittedModel::lml)
      .def_property_readonly("params", &FittedModel::params)
      .def_property_readonly("param_names",
                             [](const FittedModel& f) { return ModelTemplate(f.family(), f.system(), f.data()).names(); })
      .def_property_readonly("theta_p", &FittedModel::theta_p)
      .def_property_readonly("system", &FittedModel::system, py::return_value_policy::copy)
      .def("predict", [](const FittedModel& f, const Matrix& Xq, bool var) { return prediction(f.predict(Xq, covariance_mode(var))); },
           py::arg("Xq"), py::arg("var") = true, "Posterior mean and marginal variance of the accelerations.")
      .def("infer_abar",
           [](const FittedModel& f, const Matrix& Xq, bool var) {
             return prediction(f.gp2().infer_abar(Xq, covariance_mode(var)));
           },
           py::arg("Xq"), py::arg("var") = true)
      .def("transfer",
           [](const FittedModel& f, const BenchmarkSystem& target, const Matrix& Xq, bool var) {
             return prediction(f.gp2().transfer(target.constraint, Xq, covariance_mode(var)));
           },
           py::arg("target"), py::arg("Xq"), py::arg("var") = true)
      .def("sample", [](const FittedModel& f, const Matrix& Xq, int count, std::uint64_t seed) { return f.gp2().sample(Xq, count, seed); },
           py::arg("Xq"), py::arg("count"), py::arg("seed") = 0,
           "Posterior draws, one row per draw, output-major columns.")
      .def("save", [](const FittedModel& f, const std::filesystem::path& path, const std::filesystem::path& data_path) {
             save_model(f, path, data_path);
           }, py::arg("path"), py::arg("dataset_path"));

  m.def(
      "fit",
      [](const std::string& family, const BenchmarkSystem& sys, const Dataset& data, int restarts, int max_iters,
         std::uint64_t seed) {
        TrainConfig c;
        c.restarts = restarts;
        c.max_iters = max_iters;
        c.seed = seed;
        py::gil_scoped_release release;
        return fit(parse_family(family), sys, data, c).best;
      },
      py::arg("family"), py::arg("system"), py::arg("data"), py::arg("restarts") = 0, py::arg("max_iters") = 200,
      py::arg("seed") = 0, "Maximum-likelihood fit; returns the best restart.");
  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "gpsq");
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line front-end; returns (exit code, stdout, stderr).");
}

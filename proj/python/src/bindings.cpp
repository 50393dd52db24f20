#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "icsoh/error.hpp"
#include "icsoh/pipeline.hpp"

namespace py = pybind11;
using namespace icsoh;

namespace {

py::dict metrics_dict(const MetricReport& r) {
  py::dict d;
  d["rmse"] = r.rmse;
  d["mae"] = r.mae;
  d["mse"] = r.mse;
  d["mape_percent"] = r.mape_percent ? py::cast(*r.mape_percent) : py::none();
  d["n"] = r.n;
  return d;
}

std::string run(const std::string& command, const PipelineConfig& cfg) {
  py::gil_scoped_release release;
  if (command == "ingest") return cmd_ingest(cfg);
  if (command == "features") return cmd_features(cfg);
  if (command == "train") return cmd_train(cfg);
  if (command == "predict") return cmd_predict(cfg);
  if (command == "eval") return cmd_eval(cfg);
  if (command == "synth") return cmd_synth(cfg);
  if (command == "all") return cmd_all(cfg);
  throw ConfigError("unknown command: " + command);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of the icsoh SOH pipeline";

  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)config_error;

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("dataset_path", &PipelineConfig::dataset_path)
      .def_readwrite("out_dir", &PipelineConfig::out_dir)
      .def_readwrite("train_fraction", &PipelineConfig::train_fraction)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_readwrite("pca_dims", &PipelineConfig::pca_dims)
      .def_readwrite("ensemble_count", &PipelineConfig::ensemble_count)
      .def_readwrite("drop_list", &PipelineConfig::drop_list)
      .def_property(
          "n_cycles", [](const PipelineConfig& c) { return c.synth.n_cycles; },
          [](PipelineConfig& c, int n) { c.synth.n_cycles = n; })
      .def("validate", &PipelineConfig::validate)
      .def("to_text", [](const PipelineConfig& c) { return pipeline_config_to_text(c); });

  m.def("parse_config", [](const std::string& text) { return parse_pipeline_config(text); }, py::arg("text"),
        "Parse `key = value` configuration text.");
  m.def("config_hash", &config_hash, py::arg("config"));
  m.def("run_command", &run, py::arg("command"), py::arg("config"),
        "Run one pipeline subcommand and return its summary.");

  m.def(
      "savitzky_golay_smooth",
      [](const std::vector<double>& v, int window, int order) { return savitzky_golay_smooth(v, SgConfig{window, order}); },
      py::arg("values"), py::arg("window") = 9, py::arg("order") = 3);
  m.def(
      "pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
      py::arg("x"), py::arg("y"));
  m.def(
      "compute_metrics",
      [](const std::vector<double>& t, const std::vector<double>& p) { return metrics_dict(compute_metrics(t, p)); },
      py::arg("truth"), py::arg("predicted"));
  m.def(
      "pca_fit",
      [](const Eigen::MatrixXd& x, int dims) {
        const auto model = pca_fit(x, dims);
        py::dict d;
        d["eigenvalues"] = model.eigenvalues;
        d["contribution_rates"] = model.contribution_rates;
        d["components"] = model.components;
        d["scores"] = pca_transform(model, x);
        return d;
      },
      py::arg("features"), py::arg("dims") = 3);
  m.def(
      "generate_capacity",
      [](int n_cycles, std::uint64_t seed) {
        SynthConfig cfg;
        cfg.n_cycles = n_cycles;
        cfg.seed = seed;
        return synth_capacity_trajectory(cfg);
      },
      py::arg("n_cycles") = 900, py::arg("seed") = 0);
}

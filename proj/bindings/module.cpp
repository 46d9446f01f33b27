#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vrlab/config.hpp"
#include "vrlab/data.hpp"
#include "vrlab/errors.hpp"
#include "vrlab/instrument.hpp"
#include "vrlab/optimizer.hpp"
#include "vrlab/runner.hpp"

namespace py = pybind11;

namespace {

vrlab::runner::ExperimentConfig build_config(
    const std::string& text, const std::vector<std::string>& overrides) {
  auto cfg = vrlab::runner::parse_config(text);
  for (const std::string& assignment : overrides)
    vrlab::runner::apply_override(cfg, assignment);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_vrlab, m) {
  m.doc() = "finite-sum variance reduction laboratory";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const vrlab::ParseError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const vrlab::InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const vrlab::IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    }
  });

  py::class_<vrlab::runner::MetricsRecord>(m, "MetricsRecord")
      .def_readonly("run_id", &vrlab::runner::MetricsRecord::run_id)
      .def_readonly("method", &vrlab::runner::MetricsRecord::method)
      .def_readonly("epoch", &vrlab::runner::MetricsRecord::epoch)
      .def_readonly("fraction", &vrlab::runner::MetricsRecord::fraction)
      .def_readonly("train_loss", &vrlab::runner::MetricsRecord::train_loss)
      .def_readonly("train_error", &vrlab::runner::MetricsRecord::train_error)
      .def_readonly("var_ratio", &vrlab::runner::MetricsRecord::var_ratio)
      .def_readonly("iter_dist", &vrlab::runner::MetricsRecord::iter_dist)
      .def_readonly("curvature", &vrlab::runner::MetricsRecord::curvature)
      .def_readonly("wall_time_s", &vrlab::runner::MetricsRecord::wall_time_s);

  m.def(
      "run_experiment",
      [](const std::string& config_text,
         const std::vector<std::string>& overrides) {
        return vrlab::runner::run_experiment(build_config(config_text, overrides));
      },
      py::arg("config_text"), py::arg("overrides") = std::vector<std::string>{},
      "Train per the config text and return the metrics records.");
  m.def(
      "variance_scan",
      [](const std::string& config_text,
         const std::vector<std::string>& overrides) {
        return vrlab::runner::run_variance_scan(
            build_config(config_text, overrides));
      },
      py::arg("config_text"), py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "curvature_scan",
      [](const std::string& config_text,
         const std::vector<std::string>& overrides) {
        return vrlab::runner::run_curvature_scan(
            build_config(config_text, overrides));
      },
      py::arg("config_text"), py::arg("overrides") = std::vector<std::string>{});
  m.def("read_metrics_csv", &vrlab::runner::read_metrics_csv, py::arg("path"));
  m.def(
      "plot",
      [](const std::string& figure, const std::string& csv,
         const std::string& out) {
        vrlab::runner::emit_plot_data(vrlab::runner::read_metrics_csv(csv),
                                      vrlab::runner::parse_figure(figure), out);
      },
      py::arg("figure"), py::arg("csv"), py::arg("out"));

  m.def(
      "generate_dataset",
      [](std::size_t n, std::size_t height, std::size_t width,
         std::size_t channels, std::size_t classes, std::uint64_t seed,
         const std::string& path) {
        vrlab::problems::save_dataset(
            vrlab::problems::generate_synthetic_dataset(
                n, {height, width, channels}, classes, seed),
            path);
      },
      py::arg("n"), py::arg("height"), py::arg("width"), py::arg("channels"),
      py::arg("classes"), py::arg("seed"), py::arg("path"),
      "Generate a synthetic dataset and save it in the binary format.");

  m.def("trace_variance", &vrlab::instrument::trace_variance,
        py::arg("directions"));
  m.def("iterate_distance", &vrlab::instrument::iterate_distance,
        py::arg("w_k"), py::arg("w_tilde"));
  m.def("schedule_lr", &vrlab::optim::schedule_lr, py::arg("epoch"),
        py::arg("base_lr"), py::arg("drops"));
  m.def("tail_average_snapshot", &vrlab::optim::tail_average_snapshot,
        py::arg("iterates"), py::arg("fraction"));
}

#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "maglab/clustering.hpp"
#include "maglab/commands.hpp"
#include "maglab/errors.hpp"
#include "maglab/mag_params.hpp"
#include "maglab/theory.hpp"
#include "maglab/verification.hpp"

namespace py = pybind11;
using namespace maglab;

namespace {

ScalarLossConfig scalar_config(const MagParams& p, double theta, double B, const std::string& variant) {
  ScalarLossConfig c;
  c.params = p;
  c.theta_y = theta;
  c.B = B;
  c.variant = scalar_variant_from_string(variant);
  return c;
}

py::dict clustering_dict(const ClusteringResult& r) {
  py::dict d;
  d["assignment"] = r.assignment;
  d["n_clusters"] = r.n_clusters;
  d["objective_history"] = r.objective_history;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "maglab: magnitude-aware margin losses and evaluation";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<AggregationError>(m, "AggregationError", PyExc_ArithmeticError);

  py::class_<MagParams>(m, "MagParams")
      .def(py::init<>())
      .def(py::init([](double s, double l_a, double u_a, double l_m, double u_m, double lambda_g) {
             MagParams p{s, l_a, u_a, l_m, u_m, lambda_g};
             p.validate();
             return p;
           }),
           py::arg("s") = 64.0, py::arg("l_a") = 10.0, py::arg("u_a") = 110.0, py::arg("l_m") = 0.4,
           py::arg("u_m") = 0.8, py::arg("lambda_g") = 35.0)
      .def_readwrite("s", &MagParams::s)
      .def_readwrite("l_a", &MagParams::l_a)
      .def_readwrite("u_a", &MagParams::u_a)
      .def_readwrite("l_m", &MagParams::l_m)
      .def_readwrite("u_m", &MagParams::u_m)
      .def_readwrite("lambda_g", &MagParams::lambda_g)
      .def("slope", &MagParams::slope)
      .def("guarantees_hold", &MagParams::guarantees_hold)
      .def("__repr__", [](const MagParams& p) {
        std::ostringstream ss;
        ss << "MagParams(s=" << p.s << ", l_a=" << p.l_a << ", u_a=" << p.u_a << ", l_m=" << p.l_m
           << ", u_m=" << p.u_m << ", lambda_g=" << p.lambda_g << ")";
        return ss.str();
      });

  m.def("margin", &margin, py::arg("a"), py::arg("params"));
  m.def("regularizer", &regularizer, py::arg("a"), py::arg("params"));
  m.def("lambda_lower_bound", &lambda_lower_bound, py::arg("params"));
  m.def("lemma1_probability", &lemma1_probability, py::arg("n"), py::arg("k"), py::arg("margin"));

  m.def(
      "scalar_loss",
      [](double a, const MagParams& p, double theta, double B, const std::string& variant) {
        return scalar_loss(a, scalar_config(p, theta, B, variant));
      },
      py::arg("a"), py::arg("params"), py::arg("theta"), py::arg("B"), py::arg("variant") = "magface");
  m.def(
      "optimal_magnitude",
      [](const MagParams& p, double theta, double B, const std::string& variant) {
        return optimal_magnitude(scalar_config(p, theta, B, variant)).a_star;
      },
      py::arg("params"), py::arg("theta"), py::arg("B"), py::arg("variant") = "magface");

  m.def(
      "fnmr_at_fmr",
      [](const std::vector<double>& genuine, const std::vector<double>& impostor, double target) {
        const ThresholdResult r = fnmr_at_fmr(genuine, impostor, target);
        return py::make_tuple(r.threshold, r.fnmr);
      },
      py::arg("genuine"), py::arg("impostor"), py::arg("fmr_target"),
      "Returns (threshold, fnmr).");

  m.def("aggregate_mean", &aggregate_mean, py::arg("features"));
  m.def("aggregate_magface_plus", &aggregate_magface_plus, py::arg("features"));

  m.def(
      "kmeans", [](const Matrix& e, int k, std::uint64_t seed) { return clustering_dict(kmeans(e, k, seed)); },
      py::arg("embeddings"), py::arg("k"), py::arg("seed") = 0);
  m.def(
      "ahc", [](const Matrix& e, int k) { return clustering_dict(ahc(e, k)); }, py::arg("embeddings"),
      py::arg("k"));
  m.def(
      "dbscan",
      [](const Matrix& e, double eps, int min_pts) { return clustering_dict(dbscan(e, eps, min_pts)); },
      py::arg("embeddings"), py::arg("eps"), py::arg("min_pts"));
  m.def(
      "nmi", [](const std::vector<int>& a, const std::vector<int>& b) { return nmi(a, b); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "bcubed_f",
      [](const std::vector<int>& pred, const std::vector<int>& truth) {
        const BCubedScore s = bcubed_f(pred, truth);
        return py::make_tuple(s.precision, s.recall, s.f);
      },
      py::arg("pred"), py::arg("truth"), "Returns (precision, recall, f).");

  m.def(
      "run",
      [](const std::string& command, const std::filesystem::path& config, const std::filesystem::path& out,
         std::optional<std::uint64_t> seed) {
        Command c;
        if (command == "verify-theory") {
          c = Command::kVerifyTheory;
        } else if (command == "train") {
          c = Command::kTrain;
        } else if (command == "eval") {
          c = Command::kEval;
        } else {
          throw py::value_error("unknown command '" + command + "'");
        }
        std::ostringstream log, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_command(c, {config, out, seed}, log, err);
        }
        return py::make_tuple(code, log.str(), err.str());
      },
      py::arg("command"), py::arg("config"), py::arg("out"), py::arg("seed") = py::none(),
      "Runs a CLI subcommand; returns (exit_code, log, errors).");
}

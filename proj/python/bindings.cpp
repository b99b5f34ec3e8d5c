#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "privstream/device.hpp"
#include "privstream/experiments.hpp"
#include "privstream/fleet.hpp"
#include "privstream/query.hpp"
#include "privstream/random.hpp"
#include "privstream/randomized_response.hpp"

namespace py = pybind11;
using namespace privstream;

namespace {

RandomizationParams make_params(double p, double q, double p_min) {
  RandomizationParams params;
  params.p = p;
  params.q = q;
  params.p_min = p_min;
  params.ensure_valid();
  return params;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Randomized-response collection pipeline: privacy core, query "
            "model, and fleet simulation";

  py::register_exception<ParameterError>(m, "ParameterError",
                                         PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError",
                                          PyExc_ValueError);
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError",
                                               PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<RandomizationParams>(m, "RandomizationParams")
      .def(py::init(&make_params), py::arg("p"), py::arg("q"),
           py::arg("p_min") = kDefaultPMin)
      .def_readonly("p", &RandomizationParams::p)
      .def_readonly("q", &RandomizationParams::q)
      .def_readonly("p_min", &RandomizationParams::p_min)
      .def("prob_report_one", &RandomizationParams::prob_report_one,
           py::arg("truth"));

  py::class_<PrivacyCost>(m, "PrivacyCost")
      .def_readonly("epsilon_per_bit", &PrivacyCost::epsilon_per_bit)
      .def_readonly("epsilon_per_query", &PrivacyCost::epsilon_per_query);

  py::class_<EstimateResult>(m, "EstimateResult")
      .def_readonly("y_raw", &EstimateResult::y_raw)
      .def_readonly("y_clamped", &EstimateResult::y_clamped)
      .def_readonly("n_answers", &EstimateResult::n_answers)
      .def_readonly("stddev", &EstimateResult::stddev);

  m.def(
      "randomize_answer",
      [](const std::vector<std::uint8_t>& bits, double p, double q,
         std::uint64_t seed) {
        RandomizationParams params = make_params(p, q, kDefaultPMin);
        RandomSource rng = RandomSource::seeded(seed);
        return randomize_answer(bits, params, rng);
      },
      py::arg("bits"), py::arg("p"), py::arg("q"), py::arg("seed"),
      "Privatize a 0/1 answer vector with a fixed seed.");

  m.def(
      "estimate_true_count",
      [](std::uint64_t y_ones, std::uint64_t n, double p, double q) {
        return estimate_true_count(y_ones, n, make_params(p, q, kDefaultPMin));
      },
      py::arg("y_reported_ones"), py::arg("n_answers"), py::arg("p"),
      py::arg("q"));

  m.def("relative_error", &relative_error, py::arg("y_true"),
        py::arg("y_est"));

  m.def(
      "epsilon_of",
      [](double p, double q) {
        return epsilon_of(make_params(p, q, 1e-12));
      },
      py::arg("p"), py::arg("q"));

  m.def("params_for_target", &params_for_target, py::arg("epsilon_target"),
        py::arg("q"), py::arg("p_min") = kDefaultPMin);

  m.def(
      "estimator_stddev",
      [](std::uint64_t n, double y_hypothesis, double p, double q) {
        return estimator_stddev(n, y_hypothesis, make_params(p, q, 1e-12));
      },
      py::arg("n_answers"), py::arg("y_true_hypothesis"), py::arg("p"),
      py::arg("q"));

  m.def("pseudonym_for_epoch", &pseudonym_for_epoch, py::arg("auth_token"),
        py::arg("query_id"), py::arg("epoch_index"));

  py::class_<Bucket>(m, "Bucket")
      .def(py::init([](double lo, std::optional<double> hi) {
             return Bucket{lo, hi};
           }),
           py::arg("lo"), py::arg("hi") = std::nullopt)
      .def_readonly("lo", &Bucket::lo)
      .def_readonly("hi", &Bucket::hi)
      .def("contains", &Bucket::contains, py::arg("value"));

  py::class_<Query>(m, "Query")
      .def(py::init<>())
      .def_readwrite("query_id", &Query::query_id)
      .def_readwrite("analyst_id", &Query::analyst_id)
      .def_readwrite("sensor", &Query::sensor)
      .def_readwrite("buckets", &Query::buckets)
      .def_readwrite("params", &Query::params)
      .def_readwrite("epoch_seconds", &Query::epoch_seconds)
      .def_readwrite("t_start", &Query::t_start)
      .def_readwrite("t_end", &Query::t_end)
      .def_readwrite("signature", &Query::signature)
      .def("n", &Query::n);

  m.def("serialize_query", &serialize_query, py::arg("query"));
  m.def("parse_query", &parse_query, py::arg("text"),
        py::arg("strict") = true);
  m.def(
      "validate_query",
      [](const Query& query, TimestampMs now) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const Violation& v : validate_query(query, now).violations) {
          out.emplace_back(v.field, v.message);
        }
        return out;
      },
      py::arg("query"), py::arg("now"),
      "Violation list as (field, message) pairs; empty means valid.");
  m.def(
      "bucket_index_of",
      [](double value, const Query& query) {
        return bucket_index_of(value, query);
      },
      py::arg("value"), py::arg("query"));
  m.def("speed_query", &speed_query, py::arg("params"),
        "The canonical 22-bucket speed histogram query.");

  py::class_<FleetConfig>(m, "FleetConfig")
      .def(py::init<>())
      .def_readwrite("n_devices", &FleetConfig::n_devices)
      .def_readwrite("sensitive_fraction", &FleetConfig::sensitive_fraction)
      .def_readwrite("answer_interval_seconds",
                     &FleetConfig::answer_interval_seconds)
      .def_readwrite("window_seconds", &FleetConfig::window_seconds)
      .def_readwrite("churn_rate", &FleetConfig::churn_rate)
      .def_readwrite("duration_seconds", &FleetConfig::duration_seconds)
      .def_readwrite("seed", &FleetConfig::seed);

  m.def("serialize_fleet_config", &serialize_fleet_config, py::arg("config"));
  m.def("parse_fleet_config", &parse_fleet_config, py::arg("text"),
        py::arg("strict") = true);
  m.def("generate_population", &generate_population, py::arg("config"));

  m.def(
      "run_fleet_summary",
      [](const FleetConfig& config, const Query& query,
         std::size_t target_index, std::size_t background_index) {
        RunOptions options;
        options.target_index = target_index;
        options.background_index = background_index;
        const RunRecord record = run_fleet(config, query, options);
        py::list rows;
        for (const WindowRecord& w : record.windows) {
          py::dict row;
          row["window_index"] = w.window_index;
          row["n_answers"] = w.estimate.n_answers;
          row["y_true"] = w.ground_truth[target_index];
          row["y_raw"] = w.estimate.n_answers > 0
                             ? w.estimate.estimates[target_index].y_raw
                             : 0.0;
          row["eta"] = w.relative_errors[target_index];
          rows.append(std::move(row));
        }
        return rows;
      },
      py::arg("config"), py::arg("query"), py::arg("target_index") = 1,
      py::arg("background_index") = 0,
      "Per-window (n_answers, y_true, y_raw, eta) at the target bucket.");
}

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "privstream/fleet.hpp"
#include "privstream/query.hpp"

namespace privstream {

// Partial FleetConfig: unset fields take the experiment's defaults. When an
// override hits the axis an experiment sweeps, the axis collapses to that
// single value.
struct FleetOverrides {
  std::optional<std::uint64_t> n_devices;
  std::optional<double> sensitive_fraction;
  std::optional<double> p;
  std::optional<double> q;
  std::optional<double> answer_interval_seconds;
  std::optional<double> window_seconds;
  std::optional<double> duration_seconds;
  std::optional<double> churn_rate;
};

struct ExperimentSpec {
  std::string name = "error_vs_samplesize";
  FleetOverrides overrides;
  unsigned repetitions = 0;  // 0 picks the experiment default
  std::uint64_t master_seed = 1;
  unsigned n_shards = 1;
};

struct ExperimentResult {
  std::string name;
  std::vector<FleetConfig> configs;
  RandomizationParams params;
  SweepResult sweep;
  // Per-observation rows carrying y_true and y_est so eta can be recomputed
  // from the file alone.
  std::string detail_csv;
  // The sweep table (one row per config).
  std::string summary_csv;
  std::string summary_line;
};

std::vector<std::string> experiment_names();

// Canonical 22-bucket vehicle-speed histogram query used by every canned
// experiment: {0}, [1,11), [11,21), ..., [191,201), [201,inf).
Query speed_query(const RandomizationParams& params);

// Runs the named experiment and renders both CSV artifacts. Throws
// ParameterError on an unknown name or invalid overrides.
ExperimentResult run_experiment(const ExperimentSpec& spec);

}  // namespace privstream

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "privstream/query.hpp"
#include "privstream/types.hpp"
#include "privstream/wire.hpp"

namespace privstream {

// Synthetic fleet description. Durations are in seconds to mirror the config
// file format; millisecond accessors are derived.
struct FleetConfig {
  std::uint64_t n_devices = 1000;
  double sensitive_fraction = 0.8;
  double answer_interval_seconds = 10.0;
  double window_seconds = 1.0;
  double churn_rate = 0.0;  // probability a device skips a given epoch
  double duration_seconds = 100.0;
  std::uint64_t seed = 1;

  DurationMs interval_ms() const;
  DurationMs window_ms() const;
  DurationMs duration_ms() const;

  ValidationReport validate() const;
  void ensure_valid() const;  // throws ParameterError with the violation list

  bool operator==(const FleetConfig&) const = default;
};

std::string serialize_fleet_config(const FleetConfig& config);
FleetConfig parse_fleet_config(std::string_view text, bool strict = true);

// Sensitive-attribute flags, one per device: exactly
// round(n_devices * sensitive_fraction) ones, placement fixed by the seed.
std::vector<std::uint8_t> generate_population(const FleetConfig& config);

struct RunOptions {
  // Devices are split across shards; results are bit-identical for any count.
  unsigned n_shards = 1;
  // Bucket the sensitive devices' truthful value falls into, and the bucket
  // for everyone else.
  std::size_t target_index = 1;
  std::size_t background_index = 0;
  // Estimated peak memory above this bound aborts before allocation.
  std::size_t memory_budget_bytes = std::size_t{4} << 30;
};

// One closed window paired with its ground truth. Ground truth counts only
// the devices that actually submitted within the window; relative error is
// |truth - y_raw| / truth per index, NaN where the truth is zero.
struct WindowRecord {
  std::int64_t window_index = 0;
  std::vector<std::uint64_t> ground_truth;
  BatchEstimate estimate;
  std::vector<double> relative_errors;
};

struct RunRecord {
  FleetConfig config;
  std::vector<WindowRecord> windows;
};

// Simulates duration_seconds of virtual time: every live device submits once
// per answer interval at a seed-fixed phase; aggregator windows close every
// window_seconds. The query's epoch length must equal the answer interval.
RunRecord run_fleet(const FleetConfig& config, const Query& query,
                    const RunOptions& options = RunOptions{});

std::string serialize_window_record(const WindowRecord& record);

// One measured (window, bucket) observation from a sweep, kept so CSV rows
// can be recomputed from raw counts.
struct SweepSample {
  std::size_t config_index = 0;
  unsigned rep = 0;
  std::int64_t window_index = 0;
  std::size_t bucket_index = 0;
  std::uint64_t y_true = 0;
  double y_est = 0.0;
  double eta = 0.0;
};

struct SweepRow {
  FleetConfig config;
  double median_eta = 0.0;
  double mean_eta = 0.0;
  double std_eta = 0.0;
  std::uint64_t n_windows = 0;  // eta observations behind the aggregates
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSample> samples;
};

// Runs every config `repetitions` times with seeds derived from the master
// seed and aggregates relative errors at the target index across windows.
SweepResult sweep(const std::vector<FleetConfig>& configs,
                  const Query& query_template, unsigned repetitions,
                  std::uint64_t master_seed,
                  const RunOptions& options = RunOptions{});

// CSV with header n_devices,fraction,p,q,window_s,median_eta,...
std::string sweep_csv(const std::vector<SweepRow>& rows,
                      const RandomizationParams& params);

// Shortest decimal form that round trips to the same double.
std::string format_double(double value);

}  // namespace privstream

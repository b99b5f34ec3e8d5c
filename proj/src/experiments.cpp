#include "privstream/experiments.hpp"

#include <algorithm>

#include "privstream/errors.hpp"

namespace privstream {

namespace {

constexpr TimestampMs kSimStart = 1'600'000'000'000;  // fixed virtual origin

enum class Kind { samplesize, fraction, frequency, million };

std::optional<Kind> kind_of(std::string_view name) {
  if (name == "error_vs_samplesize") return Kind::samplesize;
  if (name == "error_vs_fraction") return Kind::fraction;
  if (name == "error_vs_frequency") return Kind::frequency;
  if (name == "endtoend_million") return Kind::million;
  return std::nullopt;
}

template <typename T>
std::vector<T> axis_or(const std::optional<T>& override_value,
                       std::vector<T> defaults) {
  if (override_value) return {*override_value};
  return defaults;
}

void apply_common(FleetConfig& config, const FleetOverrides& o) {
  if (o.sensitive_fraction) config.sensitive_fraction = *o.sensitive_fraction;
  if (o.answer_interval_seconds)
    config.answer_interval_seconds = *o.answer_interval_seconds;
  if (o.window_seconds) config.window_seconds = *o.window_seconds;
  if (o.duration_seconds) config.duration_seconds = *o.duration_seconds;
  if (o.churn_rate) config.churn_rate = *o.churn_rate;
}

}  // namespace

std::vector<std::string> experiment_names() {
  return {"error_vs_samplesize", "error_vs_fraction", "error_vs_frequency",
          "endtoend_million"};
}

Query speed_query(const RandomizationParams& params) {
  Query q;
  q.query_id = "speed-histogram";
  q.analyst_id = "bench";
  q.sensor = "speed";
  q.buckets.push_back(Bucket{0.0, 1.0});
  for (double lo = 1.0; lo < 200.0; lo += 10.0) {
    q.buckets.push_back(Bucket{lo, lo + 10.0});
  }
  q.buckets.push_back(Bucket{201.0, std::nullopt});
  q.params = params;
  q.epoch_seconds = 10.0;
  q.t_start = kSimStart;
  q.t_end = kSimStart + 86'400'000;
  q.signature = "unsigned-benchmark";
  return q;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const std::optional<Kind> kind = kind_of(spec.name);
  if (!kind) {
    std::string names;
    for (const std::string& n : experiment_names()) {
      if (!names.empty()) names += ", ";
      names += n;
    }
    throw ParameterError("unknown experiment `" + spec.name +
                         "` (expected one of: " + names + ")");
  }

  RandomizationParams params;
  params.p = 0.5;
  params.q = 0.5;
  FleetConfig base;
  base.sensitive_fraction = 0.8;
  base.churn_rate = 0.0;
  unsigned reps = 2;
  std::vector<FleetConfig> configs;

  switch (*kind) {
    case Kind::samplesize: {
      base.answer_interval_seconds = 10.0;
      base.window_seconds = 10.0;
      base.duration_seconds = 100.0;
      apply_common(base, spec.overrides);
      for (std::uint64_t n : axis_or<std::uint64_t>(
               spec.overrides.n_devices, {100, 1000, 10000, 100000})) {
        FleetConfig c = base;
        c.n_devices = n;
        configs.push_back(c);
      }
      break;
    }
    case Kind::fraction: {
      base.answer_interval_seconds = 10.0;
      base.window_seconds = 10.0;
      base.duration_seconds = 100.0;
      apply_common(base, spec.overrides);
      for (double f : axis_or<double>(spec.overrides.sensitive_fraction,
                                      {0.2, 0.5, 0.8})) {
        for (std::uint64_t n : axis_or<std::uint64_t>(
                 spec.overrides.n_devices, {100, 1000, 10000})) {
          FleetConfig c = base;
          c.sensitive_fraction = f;
          c.n_devices = n;
          configs.push_back(c);
        }
      }
      break;
    }
    case Kind::frequency: {
      params.p = 0.75;
      base.n_devices = 10000;
      base.window_seconds = 1.0;
      base.duration_seconds = 30.0;
      apply_common(base, spec.overrides);
      if (spec.overrides.n_devices) base.n_devices = *spec.overrides.n_devices;
      for (double interval : axis_or<double>(
               spec.overrides.answer_interval_seconds, {1.0, 2.0, 5.0, 10.0})) {
        FleetConfig c = base;
        c.answer_interval_seconds = interval;
        configs.push_back(c);
      }
      break;
    }
    case Kind::million: {
      params.p = 0.75;
      base.n_devices = 1'000'000;
      base.answer_interval_seconds = 10.0;
      base.window_seconds = 1.0;
      base.duration_seconds = 100.0;
      reps = 1;
      apply_common(base, spec.overrides);
      if (spec.overrides.n_devices) base.n_devices = *spec.overrides.n_devices;
      configs.push_back(base);
      break;
    }
  }
  if (spec.overrides.p) params.p = *spec.overrides.p;
  if (spec.overrides.q) params.q = *spec.overrides.q;
  if (spec.repetitions > 0) reps = spec.repetitions;

  const Query query = speed_query(params);
  RunOptions options;
  options.n_shards = spec.n_shards;
  options.target_index = 1;
  options.background_index = 0;

  ExperimentResult result;
  result.name = spec.name;
  result.configs = configs;
  result.params = params;
  result.sweep = sweep(configs, query, reps, spec.master_seed, options);
  result.summary_csv = sweep_csv(result.sweep.rows, params);

  std::string detail =
      "experiment,n_devices,fraction,p,q,interval_s,window_s,rep,window_index,"
      "bucket_index,y_true,y_est,eta\n";
  for (const SweepSample& s : result.sweep.samples) {
    const FleetConfig& c = configs[s.config_index];
    detail += spec.name;
    detail += ',';
    detail += std::to_string(c.n_devices);
    detail += ',';
    detail += format_double(c.sensitive_fraction);
    detail += ',';
    detail += format_double(params.p);
    detail += ',';
    detail += format_double(params.q);
    detail += ',';
    detail += format_double(c.answer_interval_seconds);
    detail += ',';
    detail += format_double(c.window_seconds);
    detail += ',';
    detail += std::to_string(s.rep);
    detail += ',';
    detail += std::to_string(s.window_index);
    detail += ',';
    detail += std::to_string(s.bucket_index);
    detail += ',';
    detail += std::to_string(s.y_true);
    detail += ',';
    detail += format_double(s.y_est);
    detail += ',';
    detail += format_double(s.eta);
    detail += '\n';
  }
  result.detail_csv = std::move(detail);

  // Headline: the row with the most answers behind it, which is the best
  // utility the run demonstrates.
  const SweepRow* headline = nullptr;
  for (const SweepRow& row : result.sweep.rows) {
    if (headline == nullptr || row.config.n_devices > headline->config.n_devices)
      headline = &row;
  }
  std::string line = spec.name;
  if (!configs.empty()) {
    std::uint64_t n_lo = configs.front().n_devices;
    std::uint64_t n_hi = n_lo;
    for (const FleetConfig& c : configs) {
      n_lo = std::min(n_lo, c.n_devices);
      n_hi = std::max(n_hi, c.n_devices);
    }
    line += " n_devices=" + std::to_string(n_lo);
    if (n_hi != n_lo) line += ".." + std::to_string(n_hi);
  }
  line += " p=" + format_double(params.p) + " q=" + format_double(params.q);
  if (headline != nullptr) {
    line += " median_eta=" + format_double(headline->median_eta);
    line += " mean_eta=" + format_double(headline->mean_eta);
  }
  result.summary_line = std::move(line);
  return result;
}

}  // namespace privstream

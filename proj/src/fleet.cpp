#include "privstream/fleet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <thread>

#include "json.hpp"
#include "json_util.hpp"
#include "privstream/aggregator.hpp"
#include "privstream/device.hpp"
#include "privstream/errors.hpp"
#include "privstream/random.hpp"
#include "privstream/randomized_response.hpp"

namespace privstream {

using nlohmann::json;

namespace {

// Seed derivation streams, so population, tokens, and per-device coin flips
// never overlap.
constexpr std::uint64_t kStreamPopulation = 0;
constexpr std::uint64_t kStreamDeviceRng = 1;
constexpr std::uint64_t kStreamToken = 2;
constexpr std::uint64_t kStreamSweepBase = 1000;

DurationMs seconds_to_ms(double seconds) {
  return static_cast<DurationMs>(std::llround(seconds * 1000.0));
}

}  // namespace

DurationMs FleetConfig::interval_ms() const {
  return seconds_to_ms(answer_interval_seconds);
}
DurationMs FleetConfig::window_ms() const {
  return seconds_to_ms(window_seconds);
}
DurationMs FleetConfig::duration_ms() const {
  return seconds_to_ms(duration_seconds);
}

ValidationReport FleetConfig::validate() const {
  ValidationReport report;
  if (n_devices < 1) report.add("n_devices", "must be at least 1");
  if (!(sensitive_fraction >= 0.0 && sensitive_fraction <= 1.0))
    report.add("sensitive_fraction", "must lie in [0, 1]");
  if (!(answer_interval_seconds > 0.0)) {
    report.add("answer_interval_seconds", "must be positive");
  } else if (interval_ms() < 1) {
    report.add("answer_interval_seconds", "rounds below one millisecond");
  }
  if (!(window_seconds > 0.0)) {
    report.add("window_seconds", "must be positive");
  } else if (window_ms() < 1) {
    report.add("window_seconds", "rounds below one millisecond");
  }
  if (!(churn_rate >= 0.0 && churn_rate <= 1.0))
    report.add("churn_rate", "must lie in [0, 1]");
  if (!(duration_seconds > 0.0)) {
    report.add("duration_seconds", "must be positive");
  } else if (window_seconds > 0.0 && duration_ms() < window_ms()) {
    report.add("duration_seconds", "must cover at least one window");
  }
  return report;
}

void FleetConfig::ensure_valid() const {
  ValidationReport report = validate();
  if (!report.ok()) throw ParameterError("invalid fleet config:\n" + report.to_string());
}

std::string serialize_fleet_config(const FleetConfig& config) {
  json doc;
  doc["answer_interval_seconds"] = config.answer_interval_seconds;
  doc["churn_rate"] = config.churn_rate;
  doc["duration_seconds"] = config.duration_seconds;
  doc["n_devices"] = config.n_devices;
  doc["seed"] = config.seed;
  doc["sensitive_fraction"] = config.sensitive_fraction;
  doc["window_seconds"] = config.window_seconds;
  return doc.dump();
}

FleetConfig parse_fleet_config(std::string_view text, bool strict) {
  const json doc = detail::parse_document(text);
  if (!doc.is_object()) throw ParseError("fleet config must be a JSON object");
  if (strict) {
    detail::reject_unknown_fields(
        doc,
        {"answer_interval_seconds", "churn_rate", "duration_seconds",
         "n_devices", "seed", "sensitive_fraction", "window_seconds"},
        "fleet config");
  }
  FleetConfig config;
  config.n_devices = detail::require_uint(doc, "n_devices");
  config.sensitive_fraction = detail::require_number(doc, "sensitive_fraction");
  config.answer_interval_seconds =
      detail::require_number(doc, "answer_interval_seconds");
  config.window_seconds = detail::require_number(doc, "window_seconds");
  config.churn_rate = detail::require_number(doc, "churn_rate");
  config.duration_seconds = detail::require_number(doc, "duration_seconds");
  config.seed = detail::require_uint(doc, "seed");
  return config;
}

std::vector<std::uint8_t> generate_population(const FleetConfig& config) {
  config.ensure_valid();
  const std::uint64_t n = config.n_devices;
  const auto k = static_cast<std::uint64_t>(std::llround(
      static_cast<double>(n) * config.sensitive_fraction));
  std::vector<std::uint8_t> flags(n, 0);
  std::fill(flags.begin(), flags.begin() + static_cast<std::ptrdiff_t>(std::min(k, n)), 1);
  RandomSource rng =
      RandomSource::seeded(derive_seed(config.seed, kStreamPopulation));
  for (std::uint64_t i = n; i > 1; --i) {
    const std::uint64_t j = rng.uniform_below(i);
    std::swap(flags[i - 1], flags[j]);
  }
  return flags;
}

namespace {

// Per-device accounting the simulator keeps outside the agents. A device is
// pinned to the shard that first schedules it.
struct ShardState {
  // calendar[w] holds indices of devices whose next submission falls in
  // window w.
  std::vector<std::vector<std::uint32_t>> calendar;
  std::vector<std::uint64_t> gt;  // ground truth for the current window
};

}  // namespace

RunRecord run_fleet(const FleetConfig& config, const Query& query,
                    const RunOptions& options) {
  config.ensure_valid();
  query.params.ensure_valid();
  if (options.n_shards < 1) throw ParameterError("n_shards must be at least 1");
  const std::size_t n_buckets = query.n();
  if (n_buckets == 0) throw ParameterError("query has no buckets");
  if (options.target_index >= n_buckets || options.background_index >= n_buckets)
    throw ParameterError("bucket index out of range for the query");
  if (query.epoch_ms() != config.interval_ms())
    throw ParameterError(
        "query epoch length must equal the fleet answer interval");

  const DurationMs window_ms = config.window_ms();
  const DurationMs interval_ms = config.interval_ms();
  const TimestampMs t0 = query.t_start;
  const std::int64_t n_windows = config.duration_ms() / window_ms;
  const TimestampMs horizon = t0 + n_windows * window_ms;
  const std::uint64_t n_devices = config.n_devices;
  if (n_devices > 0xffffffffull)
    throw CapacityError("device count exceeds the 32-bit scheduler index",
                        n_devices * 8);

  // Rough peak-memory model: agent plus scheduler slot plus two retained
  // epochs of seen pseudonyms.
  const std::size_t required_bytes =
      static_cast<std::size_t>(n_devices) * (560 + 16 + 2 * 110) +
      static_cast<std::size_t>(n_windows + 2) * 64;
  if (required_bytes > options.memory_budget_bytes) {
    throw CapacityError(
        "fleet run needs an estimated " + std::to_string(required_bytes) +
            " bytes, over the " + std::to_string(options.memory_budget_bytes) +
            " byte budget",
        required_bytes);
  }

  auto shared_query = std::make_shared<const Query>(query);
  auto policy = std::make_shared<const DevicePolicy>([] {
    DevicePolicy p;
    p.epsilon_threshold_per_query = std::numeric_limits<double>::infinity();
    return p;
  }());

  const std::vector<std::uint8_t> sensitive = generate_population(config);
  const double target_value = query.buckets[options.target_index].lo;
  const double background_value = query.buckets[options.background_index].lo;

  std::vector<DeviceAgent> agents;
  agents.reserve(n_devices);
  std::vector<TimestampMs> next_time(n_devices, 0);

  const unsigned n_shards =
      static_cast<unsigned>(std::min<std::uint64_t>(options.n_shards, n_devices));
  std::vector<ShardState> shards(n_shards);
  for (ShardState& shard : shards) {
    shard.calendar.resize(static_cast<std::size_t>(n_windows));
    shard.gt.assign(n_buckets, 0);
  }

  for (std::uint64_t i = 0; i < n_devices; ++i) {
    agents.emplace_back(
        "d" + std::to_string(i),
        "t" + std::to_string(derive_seed(config.seed, kStreamToken, i)), policy,
        RandomSource::seeded(derive_seed(config.seed, kStreamDeviceRng, i)));
    DeviceAgent& agent = agents.back();
    const SanityResult check = agent.consider_query(shared_query, t0);
    if (!check.accepted)
      throw Error(std::string("fleet policy rejected the query: ") +
                  to_string(check.reason));
    agent.ingest_sample(query.sensor,
                        sensitive[i] ? target_value : background_value, t0);
    const TimestampMs first =
        t0 + static_cast<TimestampMs>(
                 agent.rng().uniform_below(static_cast<std::uint64_t>(interval_ms)));
    next_time[i] = first;
    if (first < horizon && first < query.t_end) {
      ShardState& shard = shards[n_shards * i / n_devices];
      shard.calendar[static_cast<std::size_t>((first - t0) / window_ms)]
          .push_back(static_cast<std::uint32_t>(i));
    }
  }

  Aggregator aggregator(AggregatorConfig{window_ms, 2});
  aggregator.register_query(shared_query, t0);
  BatchStream stream = aggregator.subscribe(query.query_id);

  RunRecord record;
  record.config = config;
  record.windows.reserve(static_cast<std::size_t>(n_windows));

  for (std::int64_t w = 0; w < n_windows; ++w) {
    auto process = [&](ShardState& shard) {
      std::fill(shard.gt.begin(), shard.gt.end(), 0);
      auto& due = shard.calendar[static_cast<std::size_t>(w)];
      // Indexed loop: when the interval is shorter than the window, a
      // device's next event lands back in `due` and is handled this pass.
      for (std::size_t k = 0; k < due.size(); ++k) {
        const std::uint32_t idx = due[k];
        DeviceAgent& agent = agents[idx];
        const TimestampMs at = next_time[idx];
        const bool skip = agent.rng().bernoulli(config.churn_rate);
        if (!skip) {
          EpochResult result = agent.execute_epoch(query.query_id, at);
          if (result.outcome != EpochOutcome::submitted)
            throw Error(std::string("fleet scheduling bug: ") +
                        to_string(result.outcome));
          const AcceptReason reason =
              aggregator.accept_answer(*result.submission);
          if (reason != AcceptReason::ok)
            throw Error(std::string("fleet submission rejected: ") +
                        to_string(reason));
          ++shard.gt[sensitive[idx] ? options.target_index
                                    : options.background_index];
        }
        const TimestampMs next = at + interval_ms;
        next_time[idx] = next;
        if (next < horizon && next < query.t_end) {
          shard.calendar[static_cast<std::size_t>((next - t0) / window_ms)]
              .push_back(idx);
        }
      }
      due.clear();
      due.shrink_to_fit();
    };

    if (n_shards == 1) {
      process(shards[0]);
    } else {
      std::vector<std::thread> workers;
      std::vector<std::exception_ptr> failures(n_shards);
      workers.reserve(n_shards);
      for (unsigned s = 0; s < n_shards; ++s) {
        workers.emplace_back([&, s] {
          try {
            process(shards[s]);
          } catch (...) {
            failures[s] = std::current_exception();
          }
        });
      }
      for (std::thread& t : workers) t.join();
      for (const std::exception_ptr& e : failures) {
        if (e) std::rethrow_exception(e);
      }
    }

    aggregator.advance_to(t0 + (w + 1) * window_ms);
    std::optional<BatchEstimate> batch = stream.poll();
    if (!batch) throw Error("fleet scheduling bug: window not published");

    WindowRecord wr;
    wr.window_index = w;
    wr.estimate = std::move(*batch);
    wr.ground_truth.assign(n_buckets, 0);
    for (const ShardState& shard : shards) {
      for (std::size_t i = 0; i < n_buckets; ++i) {
        wr.ground_truth[i] += shard.gt[i];
      }
    }
    wr.relative_errors.assign(n_buckets,
                              std::numeric_limits<double>::quiet_NaN());
    if (wr.estimate.n_answers > 0) {
      for (std::size_t i = 0; i < n_buckets; ++i) {
        if (wr.ground_truth[i] == 0) continue;
        wr.relative_errors[i] = relative_error(
            static_cast<double>(wr.ground_truth[i]), wr.estimate.estimates[i].y_raw);
      }
    }
    record.windows.push_back(std::move(wr));
  }
  return record;
}

std::string serialize_window_record(const WindowRecord& record) {
  json doc;
  doc["estimate"] = json::parse(serialize_batch_estimate(record.estimate));
  doc["ground_truth"] = record.ground_truth;
  doc["relative_errors"] = record.relative_errors;
  doc["window_index"] = record.window_index;
  return doc.dump();
}

namespace {

double median_of(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

SweepResult sweep(const std::vector<FleetConfig>& configs,
                  const Query& query_template, unsigned repetitions,
                  std::uint64_t master_seed, const RunOptions& options) {
  if (repetitions < 1) throw ParameterError("repetitions must be at least 1");
  SweepResult result;
  result.rows.reserve(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::vector<double> etas;
    for (unsigned rep = 0; rep < repetitions; ++rep) {
      FleetConfig cfg = configs[c];
      cfg.seed = derive_seed(master_seed, kStreamSweepBase + c, rep);
      Query q = query_template;
      q.epoch_seconds = cfg.answer_interval_seconds;
      q.t_end = q.t_start + cfg.duration_ms() + cfg.interval_ms();
      const RunRecord run = run_fleet(cfg, q, options);
      for (const WindowRecord& w : run.windows) {
        if (w.estimate.n_answers == 0) continue;
        const std::uint64_t truth = w.ground_truth[options.target_index];
        if (truth == 0) continue;
        const double eta = w.relative_errors[options.target_index];
        etas.push_back(eta);
        result.samples.push_back(SweepSample{
            c, rep, w.window_index, options.target_index, truth,
            w.estimate.estimates[options.target_index].y_raw, eta});
      }
    }
    SweepRow row;
    row.config = configs[c];
    row.n_windows = etas.size();
    row.median_eta = median_of(etas);
    if (!etas.empty()) {
      double sum = 0.0;
      for (double e : etas) sum += e;
      row.mean_eta = sum / static_cast<double>(etas.size());
      if (etas.size() > 1) {
        double ss = 0.0;
        for (double e : etas) ss += (e - row.mean_eta) * (e - row.mean_eta);
        row.std_eta = std::sqrt(ss / static_cast<double>(etas.size() - 1));
      }
    } else {
      row.median_eta = std::numeric_limits<double>::quiet_NaN();
      row.mean_eta = std::numeric_limits<double>::quiet_NaN();
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

std::string sweep_csv(const std::vector<SweepRow>& rows,
                      const RandomizationParams& params) {
  std::string out =
      "n_devices,fraction,p,q,window_s,median_eta,mean_eta,std_eta,n_windows\n";
  for (const SweepRow& row : rows) {
    out += std::to_string(row.config.n_devices);
    out += ',';
    out += format_double(row.config.sensitive_fraction);
    out += ',';
    out += format_double(params.p);
    out += ',';
    out += format_double(params.q);
    out += ',';
    out += format_double(row.config.window_seconds);
    out += ',';
    out += format_double(row.median_eta);
    out += ',';
    out += format_double(row.mean_eta);
    out += ',';
    out += format_double(row.std_eta);
    out += ',';
    out += std::to_string(row.n_windows);
    out += '\n';
  }
  return out;
}

}  // namespace privstream

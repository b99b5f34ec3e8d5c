#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "privstream/aggregator.hpp"
#include "privstream/errors.hpp"
#include "privstream/experiments.hpp"
#include "privstream/fleet.hpp"
#include "privstream/ingest_server.hpp"
#include "privstream/query.hpp"
#include "privstream/wire.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

volatile std::sig_atomic_t g_stop_requested = 0;

void handle_stop_signal(int) { g_stop_requested = 1; }

privstream::TimestampMs wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string default_out_dir() {
  if (const char* env = std::getenv("PRIVSTREAM_OUT_DIR")) return env;
  return ".";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw privstream::IoError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw privstream::IoError("read failed on " + path);
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw privstream::IoError("cannot write " + path);
  out << content;
  out.flush();
  if (!out) throw privstream::IoError("write failed on " + path);
}

int cmd_run(const std::string& experiment, std::uint64_t seed,
            const privstream::FleetOverrides& overrides, unsigned reps,
            const std::string& out_dir) {
  privstream::ExperimentSpec spec;
  spec.name = experiment;
  spec.master_seed = seed;
  spec.overrides = overrides;
  spec.repetitions = reps;
  const privstream::ExperimentResult result = privstream::run_experiment(spec);
  std::filesystem::create_directories(out_dir);
  const std::string summary_path = out_dir + "/" + result.name + ".csv";
  const std::string detail_path = out_dir + "/" + result.name + "_detail.csv";
  write_file(summary_path, result.summary_csv);
  write_file(detail_path, result.detail_csv);
  std::cout << result.summary_line << '\n'
            << "wrote " << summary_path << " and " << detail_path << '\n';
  return kExitOk;
}

int cmd_validate(const std::string& path) {
  const std::string text = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return kExitValidation;
  }
  if (!doc.is_object()) {
    std::cerr << path << ": expected a JSON object\n";
    return kExitValidation;
  }
  const auto print_report = [](const privstream::ValidationReport& report) {
    const std::string out = report.to_string();
    std::cout << out;
    if (out.empty() || out.back() != '\n') std::cout << '\n';
    return report.ok() ? kExitOk : kExitValidation;
  };
  if (doc.contains("query_id")) {
    const privstream::Query query = privstream::parse_query(text);
    return print_report(privstream::validate_query(query, wall_clock_ms()));
  }
  if (doc.contains("n_devices")) {
    const privstream::FleetConfig config = privstream::parse_fleet_config(text);
    return print_report(config.validate());
  }
  std::cerr << path
            << ": unrecognized config (expected a query with `query_id` or a "
               "fleet config with `n_devices`)\n";
  return kExitValidation;
}

int cmd_serve(std::uint16_t port, privstream::DurationMs window_ms,
              std::int64_t retention, const std::vector<std::string>& query_paths,
              const std::string& publish_path) {
  privstream::AggregatorConfig config;
  config.window_ms = window_ms;
  config.duplicate_retention_epochs = retention;
  privstream::Aggregator aggregator(config);

  const privstream::TimestampMs now = wall_clock_ms();
  for (const std::string& path : query_paths) {
    const privstream::Query query = privstream::parse_query(read_file(path));
    const privstream::ValidationReport report =
        privstream::validate_query(query, now);
    if (!report.ok()) {
      std::cerr << path << ":\n" << report.to_string();
      return kExitValidation;
    }
    aggregator.register_query(std::make_shared<const privstream::Query>(query),
                              now);
    std::cerr << "registered query " << query.query_id << '\n';
  }

  std::ofstream publish_file;
  std::ostream* publish_to = &std::cout;
  if (!publish_path.empty() && publish_path != "-") {
    publish_file.open(publish_path, std::ios::binary | std::ios::app);
    if (!publish_file) {
      std::cerr << "cannot open publication log " << publish_path << '\n';
      return kExitRuntime;
    }
    publish_to = &publish_file;
  }
  aggregator.set_publication_sink([publish_to](const privstream::BatchEstimate& b) {
    *publish_to << privstream::serialize_batch_estimate(b) << '\n';
    publish_to->flush();
  });

  privstream::IngestServer server(aggregator, port);
  std::cout << "listening on 127.0.0.1:" << server.port() << std::endl;

  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  while (g_stop_requested == 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    aggregator.advance_to(wall_clock_ms());
  }
  server.stop();
  aggregator.advance_to(wall_clock_ms());
  std::cerr << "shut down cleanly\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving crowdsourced counting: fleet experiments, "
               "config validation, and a live ingestion endpoint"};
  app.require_subcommand(1);

  // run
  std::string experiment;
  std::uint64_t seed = 1;
  unsigned reps = 0;
  std::string out_dir = default_out_dir();
  privstream::FleetOverrides overrides;
  CLI::App* run_cmd =
      app.add_subcommand("run", "Run a canned experiment and write its CSVs");
  run_cmd->add_option("experiment", experiment,
                      "one of: error_vs_samplesize, error_vs_fraction, "
                      "error_vs_frequency, endtoend_million")
      ->required();
  run_cmd->add_option("--seed", seed, "master seed");
  run_cmd->add_option("--devices", overrides.n_devices, "device count");
  run_cmd->add_option("--fraction", overrides.sensitive_fraction,
                      "sensitive fraction in [0,1]");
  run_cmd->add_option("--p", overrides.p, "first-coin probability");
  run_cmd->add_option("--q", overrides.q, "second-coin probability");
  run_cmd->add_option("--interval", overrides.answer_interval_seconds,
                      "answer interval, seconds");
  run_cmd->add_option("--window", overrides.window_seconds,
                      "aggregation window, seconds");
  run_cmd->add_option("--reps", reps, "repetitions per config");
  run_cmd->add_option("--out", out_dir,
                      "output directory (default $PRIVSTREAM_OUT_DIR or .)");

  // validate
  std::string config_path;
  CLI::App* validate_cmd = app.add_subcommand(
      "validate", "Check a query or fleet config file; exit 0 iff clean");
  validate_cmd->add_option("config", config_path, "path to a JSON config")
      ->required();

  // serve
  std::uint16_t port = 0;
  privstream::DurationMs window_ms = 1000;
  std::int64_t retention = 2;
  std::vector<std::string> query_paths;
  std::string publish_path;
  CLI::App* serve_cmd = app.add_subcommand(
      "serve", "Start the ingestion endpoint for external producers");
  serve_cmd->add_option("--port", port, "TCP port (0 picks one)");
  serve_cmd->add_option("--window-ms", window_ms, "batch window, milliseconds");
  serve_cmd->add_option("--retention", retention,
                        "duplicate retention horizon, epochs");
  serve_cmd->add_option("--query", query_paths,
                        "query registration file (repeatable)");
  serve_cmd->add_option("--publish", publish_path,
                        "publication log path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return cmd_run(experiment, seed, overrides, reps, out_dir);
    }
    if (validate_cmd->parsed()) {
      return cmd_validate(config_path);
    }
    if (serve_cmd->parsed()) {
      return cmd_serve(port, window_ms, retention, query_paths, publish_path);
    }
  } catch (const privstream::ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const privstream::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const privstream::CapacityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const privstream::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

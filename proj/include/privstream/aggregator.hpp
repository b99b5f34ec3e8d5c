#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "privstream/query.hpp"
#include "privstream/types.hpp"
#include "privstream/wire.hpp"

namespace privstream {

struct AggregatorConfig {
  DurationMs window_ms = 1000;
  // How many epochs of seen-pseudonym sets are kept for duplicate detection.
  std::int64_t duplicate_retention_epochs = 2;

  void ensure_valid() const;  // throws ParameterError
};

namespace detail {
// Ordered log of published batches for one query, shared with attached
// streams so they stay valid if the aggregator goes away.
struct PublishLog {
  mutable std::mutex m;
  std::condition_variable cv;
  std::vector<BatchEstimate> batches;
};
}  // namespace detail

// Read cursor over one query's published batches. Attaching mid-stream sees
// only batches published after the attach point.
class BatchStream {
 public:
  BatchStream() = default;

  // Next batch if one is already published, else nullopt.
  std::optional<BatchEstimate> poll();
  // Blocks up to timeout_ms for the next batch.
  std::optional<BatchEstimate> wait_for(DurationMs timeout_ms);

 private:
  friend class Aggregator;
  std::shared_ptr<detail::PublishLog> log_;
  std::size_t cursor_ = 0;
};

struct AggregatorStats {
  std::uint64_t accepted = 0;
  std::array<std::uint64_t, 8> rejected_by_reason{};  // indexed by AcceptReason
  std::uint64_t batches_published = 0;

  std::uint64_t rejected_total() const {
    std::uint64_t sum = 0;
    for (std::size_t i = 1; i < rejected_by_reason.size(); ++i) {
      sum += rejected_by_reason[i];
    }
    return sum;
  }
};

// The untrusted collector. Holds only privatized bits: per-window bit sums,
// answer counts, and per-epoch pseudonym sets. Ingestion may run from many
// threads; each query's state is updated under its own lock.
class Aggregator {
 public:
  explicit Aggregator(AggregatorConfig config = AggregatorConfig{});

  // Windows are aligned to the query's t_start. `now`, when given, fast
  // forwards the first window so registration long after t_start does not
  // replay years of empty windows.
  void register_query(std::shared_ptr<const Query> query,
                      std::optional<TimestampMs> now = std::nullopt);
  bool has_query(const std::string& query_id) const;
  std::shared_ptr<const Query> query(const std::string& query_id) const;

  // Validates and folds one submission into the open window. Unknown query
  // ids throw RoutingError; every other failure is a reject code.
  AcceptReason accept_answer(const Submission& submission);

  // Closes every window that ends at or before `now`, publishing one batch
  // per window in order. Idempotent for the same `now`.
  void advance_to(TimestampMs now);

  // Publication stream for one query; throws RoutingError when unknown.
  BatchStream subscribe(const std::string& query_id);
  std::vector<BatchEstimate> published(const std::string& query_id) const;

  // Called once per closed batch, in window order per query.
  using PublicationSink = std::function<void(const BatchEstimate&)>;
  void set_publication_sink(PublicationSink sink);

  AggregatorStats stats() const;

  // Textual dump of everything held for a query; used to audit that no
  // truthful data is retained.
  std::string debug_state(const std::string& query_id) const;

  const AggregatorConfig& config() const { return config_; }

 private:
  struct EpochSeen {
    std::int64_t epoch = 0;
    std::unordered_set<std::string> pseudonyms;
  };
  struct Shard {
    mutable std::mutex m;
    std::shared_ptr<const Query> query;
    std::int64_t window_index = 0;
    TimestampMs window_start = 0;
    std::vector<std::uint64_t> bit_sums;
    std::uint64_t n_answers = 0;
    std::vector<EpochSeen> seen;  // ascending by epoch
    std::shared_ptr<detail::PublishLog> log;
    AggregatorStats stats;
  };

  Shard* find_shard(const std::string& query_id) const;
  void close_one_window(Shard& shard);  // shard.m held
  std::int64_t lowest_acceptable_epoch(const Shard& shard) const;
  std::int64_t highest_acceptable_epoch(const Shard& shard) const;

  AggregatorConfig config_;
  mutable std::shared_mutex registry_m_;
  std::unordered_map<std::string, std::unique_ptr<Shard>> shards_;
  std::mutex sink_m_;
  PublicationSink sink_;
};

}  // namespace privstream

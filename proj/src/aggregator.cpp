#include "privstream/aggregator.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "privstream/errors.hpp"
#include "privstream/randomized_response.hpp"

namespace privstream {

void AggregatorConfig::ensure_valid() const {
  if (window_ms <= 0) {
    throw ParameterError("window_ms must be positive");
  }
  if (duplicate_retention_epochs < 1) {
    throw ParameterError("duplicate_retention_epochs must be at least 1");
  }
}

std::optional<BatchEstimate> BatchStream::poll() {
  if (!log_) return std::nullopt;
  std::lock_guard lock(log_->m);
  if (cursor_ >= log_->batches.size()) return std::nullopt;
  return log_->batches[cursor_++];
}

std::optional<BatchEstimate> BatchStream::wait_for(DurationMs timeout_ms) {
  if (!log_) return std::nullopt;
  std::unique_lock lock(log_->m);
  log_->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                    [&] { return cursor_ < log_->batches.size(); });
  if (cursor_ >= log_->batches.size()) return std::nullopt;
  return log_->batches[cursor_++];
}

Aggregator::Aggregator(AggregatorConfig config) : config_(config) {
  config_.ensure_valid();
}

void Aggregator::register_query(std::shared_ptr<const Query> query,
                                std::optional<TimestampMs> now) {
  if (!query) throw ParameterError("query must not be null");
  query->params.ensure_valid();
  auto shard = std::make_unique<Shard>();
  shard->query = query;
  std::int64_t k0 = 0;
  if (now && *now > query->t_start) {
    k0 = (*now - query->t_start) / config_.window_ms;
  }
  shard->window_index = k0;
  shard->window_start = query->t_start + k0 * config_.window_ms;
  shard->bit_sums.assign(query->n(), 0);
  shard->log = std::make_shared<detail::PublishLog>();
  std::unique_lock lock(registry_m_);
  auto [it, inserted] = shards_.emplace(query->query_id, std::move(shard));
  if (!inserted) {
    throw RoutingError("query already registered: " + query->query_id);
  }
}

bool Aggregator::has_query(const std::string& query_id) const {
  std::shared_lock lock(registry_m_);
  return shards_.count(query_id) != 0;
}

std::shared_ptr<const Query> Aggregator::query(
    const std::string& query_id) const {
  std::shared_lock lock(registry_m_);
  auto it = shards_.find(query_id);
  if (it == shards_.end()) return nullptr;
  return it->second->query;
}

Aggregator::Shard* Aggregator::find_shard(const std::string& query_id) const {
  std::shared_lock lock(registry_m_);
  auto it = shards_.find(query_id);
  return it == shards_.end() ? nullptr : it->second.get();
}

std::int64_t Aggregator::lowest_acceptable_epoch(const Shard& shard) const {
  const Query& q = *shard.query;
  const std::int64_t first =
      epoch_index_at(shard.window_start, q.t_start, q.epoch_ms());
  return std::max<std::int64_t>(
      0, first - (config_.duplicate_retention_epochs - 1));
}

std::int64_t Aggregator::highest_acceptable_epoch(const Shard& shard) const {
  const Query& q = *shard.query;
  const TimestampMs window_end = shard.window_start + config_.window_ms;
  return epoch_index_at(window_end - 1, q.t_start, q.epoch_ms());
}

AcceptReason Aggregator::accept_answer(const Submission& submission) {
  Shard* shard = find_shard(submission.query_id);
  if (shard == nullptr) {
    throw RoutingError("unknown query: " + submission.query_id);
  }
  std::lock_guard lock(shard->m);
  const Query& q = *shard->query;
  auto reject = [&](AcceptReason reason) {
    ++shard->stats.rejected_by_reason[static_cast<std::size_t>(reason)];
    return reason;
  };
  if (submission.bits.size() != q.n()) {
    return reject(AcceptReason::length_mismatch);
  }
  for (std::uint8_t b : submission.bits) {
    if (b > 1) return reject(AcceptReason::malformed_bits);
  }
  if (submission.sent_at >= q.t_end) {
    return reject(AcceptReason::expired);
  }
  if (submission.epoch_index < lowest_acceptable_epoch(*shard) ||
      submission.epoch_index > highest_acceptable_epoch(*shard)) {
    return reject(AcceptReason::epoch_out_of_window);
  }
  EpochSeen* slot = nullptr;
  for (EpochSeen& es : shard->seen) {
    if (es.epoch == submission.epoch_index) {
      slot = &es;
      break;
    }
  }
  if (slot == nullptr) {
    EpochSeen fresh;
    fresh.epoch = submission.epoch_index;
    auto pos = std::upper_bound(
        shard->seen.begin(), shard->seen.end(), fresh.epoch,
        [](std::int64_t e, const EpochSeen& es) { return e < es.epoch; });
    slot = &*shard->seen.insert(pos, std::move(fresh));
  }
  if (!slot->pseudonyms.insert(submission.pseudonym).second) {
    return reject(AcceptReason::duplicate);
  }
  for (std::size_t i = 0; i < submission.bits.size(); ++i) {
    shard->bit_sums[i] += submission.bits[i];
  }
  ++shard->n_answers;
  ++shard->stats.accepted;
  return AcceptReason::ok;
}

void Aggregator::close_one_window(Shard& shard) {
  BatchEstimate batch;
  const Query& q = *shard.query;
  batch.query_id = q.query_id;
  batch.window_start_ms = shard.window_start;
  batch.window_end_ms = shard.window_start + config_.window_ms;
  batch.n_answers = shard.n_answers;
  if (shard.n_answers > 0) {
    batch.estimates.reserve(shard.bit_sums.size());
    for (std::size_t i = 0; i < shard.bit_sums.size(); ++i) {
      const EstimateResult er =
          estimate_true_count(shard.bit_sums[i], shard.n_answers, q.params);
      batch.estimates.push_back(IndexEstimate{
          static_cast<std::uint64_t>(i), er.y_raw, er.y_clamped, er.stddev});
    }
  }
  std::fill(shard.bit_sums.begin(), shard.bit_sums.end(), 0);
  shard.n_answers = 0;
  shard.window_start += config_.window_ms;
  ++shard.window_index;
  const std::int64_t keep_from = lowest_acceptable_epoch(shard);
  std::erase_if(shard.seen,
                [&](const EpochSeen& es) { return es.epoch < keep_from; });
  ++shard.stats.batches_published;
  {
    std::lock_guard log_lock(shard.log->m);
    shard.log->batches.push_back(batch);
  }
  shard.log->cv.notify_all();
  {
    std::lock_guard sink_lock(sink_m_);
    if (sink_) sink_(batch);
  }
}

void Aggregator::advance_to(TimestampMs now) {
  std::shared_lock lock(registry_m_);
  for (auto& [id, shard] : shards_) {
    std::lock_guard shard_lock(shard->m);
    while (shard->window_start + config_.window_ms <= now) {
      close_one_window(*shard);
    }
  }
}

BatchStream Aggregator::subscribe(const std::string& query_id) {
  Shard* shard = find_shard(query_id);
  if (shard == nullptr) throw RoutingError("unknown query: " + query_id);
  BatchStream stream;
  stream.log_ = shard->log;
  std::lock_guard lock(shard->log->m);
  stream.cursor_ = shard->log->batches.size();
  return stream;
}

std::vector<BatchEstimate> Aggregator::published(
    const std::string& query_id) const {
  Shard* shard = find_shard(query_id);
  if (shard == nullptr) throw RoutingError("unknown query: " + query_id);
  std::lock_guard lock(shard->log->m);
  return shard->log->batches;
}

void Aggregator::set_publication_sink(PublicationSink sink) {
  std::lock_guard lock(sink_m_);
  sink_ = std::move(sink);
}

AggregatorStats Aggregator::stats() const {
  AggregatorStats total;
  std::shared_lock lock(registry_m_);
  for (const auto& [id, shard] : shards_) {
    std::lock_guard shard_lock(shard->m);
    total.accepted += shard->stats.accepted;
    total.batches_published += shard->stats.batches_published;
    for (std::size_t i = 0; i < total.rejected_by_reason.size(); ++i) {
      total.rejected_by_reason[i] += shard->stats.rejected_by_reason[i];
    }
  }
  return total;
}

std::string Aggregator::debug_state(const std::string& query_id) const {
  Shard* shard = find_shard(query_id);
  if (shard == nullptr) throw RoutingError("unknown query: " + query_id);
  std::lock_guard lock(shard->m);
  std::ostringstream out;
  out << "query_id=" << shard->query->query_id
      << " window_index=" << shard->window_index
      << " window_start=" << shard->window_start
      << " n_answers=" << shard->n_answers << "\nbit_sums=";
  for (std::uint64_t s : shard->bit_sums) out << s << ',';
  out << "\nseen=";
  for (const EpochSeen& es : shard->seen) {
    out << "epoch " << es.epoch << ": ";
    for (const std::string& p : es.pseudonyms) out << p << ' ';
  }
  out << '\n';
  return out.str();
}

}  // namespace privstream

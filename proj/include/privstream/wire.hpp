#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "privstream/types.hpp"

namespace privstream {

// One device's privatized answer for one epoch of one query. The pseudonym is
// the only identity the aggregator ever sees.
struct Submission {
  std::string query_id;
  std::int64_t epoch_index = 0;
  std::string pseudonym;
  std::vector<std::uint8_t> bits;  // 0/1 per bucket, already randomized
  TimestampMs sent_at = 0;

  bool operator==(const Submission&) const = default;
};

struct IndexEstimate {
  std::uint64_t index = 0;
  double y_raw = 0.0;
  double y_clamped = 0.0;
  double stddev = 0.0;

  bool operator==(const IndexEstimate&) const = default;
};

// Published per-window estimates. A window with no accepted answers is
// published with n_answers == 0 and an empty estimates array, so consumers can
// tell "no data" from "zero estimate".
struct BatchEstimate {
  std::string query_id;
  TimestampMs window_start_ms = 0;
  TimestampMs window_end_ms = 0;
  std::uint64_t n_answers = 0;
  std::vector<IndexEstimate> estimates;

  bool empty_batch() const { return n_answers == 0; }
  bool operator==(const BatchEstimate&) const = default;
};

// Reply codes for the ingestion endpoint: one accept/reject byte followed by
// one reason byte.
enum class AcceptReason : std::uint8_t {
  ok = 0,
  length_mismatch = 1,
  malformed_bits = 2,
  duplicate = 3,
  epoch_out_of_window = 4,
  expired = 5,
  unknown_query = 6,
  parse_error = 7,
};

const char* to_string(AcceptReason reason);

std::string serialize_submission(const Submission& submission);
Submission parse_submission(std::string_view text, bool strict = true);

std::string serialize_batch_estimate(const BatchEstimate& estimate);
BatchEstimate parse_batch_estimate(std::string_view text);

// Length-delimited framing: 4-byte big-endian payload length, then the bytes.
void append_frame(std::string& out, std::string_view payload);

// Incremental frame decoder for a byte stream.
class FrameReader {
 public:
  explicit FrameReader(std::size_t max_frame_bytes = 1 << 20)
      : max_frame_bytes_(max_frame_bytes) {}

  void append(const char* data, std::size_t size);
  // Next complete payload, or nullopt if more bytes are needed.
  std::optional<std::string> next();

 private:
  std::size_t max_frame_bytes_;
  std::string buffer_;
  std::size_t offset_ = 0;
};

}  // namespace privstream

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "privstream/randomized_response.hpp"
#include "privstream/types.hpp"

namespace privstream {

// Half-open value range [lo, hi). An absent hi means the bucket is open-ended.
struct Bucket {
  double lo = 0.0;
  std::optional<double> hi;

  bool contains(double value) const {
    return value >= lo && (!hi.has_value() || value < *hi);
  }
  bool operator==(const Bucket&) const = default;
};

// An analyst's bucketed range query. Devices answer with an n-bit one-hot
// vector, one bit per bucket, randomized before leaving the device.
struct Query {
  std::string query_id;
  std::string analyst_id;
  std::string sensor;
  std::vector<Bucket> buckets;
  RandomizationParams params;
  double epoch_seconds = 0.0;   // how often each device answers
  TimestampMs t_start = 0;      // creation time; epoch indices count from here
  TimestampMs t_end = 0;        // answers are no longer accepted from here on
  std::string signature;        // opaque; verification is a pluggable hook

  std::size_t n() const { return buckets.size(); }
  DurationMs epoch_ms() const {
    return static_cast<DurationMs>(epoch_seconds * 1000.0 + 0.5);
  }
  bool operator==(const Query&) const = default;
};

// One device's truthful (pre-randomization) answer for one epoch.
struct TruthfulAnswer {
  std::string query_id;
  std::int64_t epoch_index = 0;
  std::vector<std::uint8_t> bits;  // one-hot, or all zeros for "no reading"
};

struct Violation {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  void add(std::string field, std::string message) {
    violations.push_back({std::move(field), std::move(message)});
  }
  std::string to_string() const;
};

// Full structural check: bucket layout, parameter domains, epoch, expiry.
// Returns the complete violation list rather than stopping at the first.
ValidationReport validate_query(const Query& query, TimestampMs now);

// Index of the unique bucket containing the value, if any.
std::optional<std::size_t> bucket_index_of(double value, const Query& query);

// One-hot encoding of a sensor reading. All zeros when no bucket contains the
// value, so the device still responds and stays inside the batch count.
TruthfulAnswer encode_value(double value, const Query& query,
                            std::int64_t epoch_index = 0);

// Canonical single-document JSON form. Field names are exact and lowercase;
// serialization is byte-stable, so serialize(parse(x)) == x for canonical
// documents.
std::string serialize_query(const Query& query);

// In strict mode unknown fields are rejected. Throws ParseError carrying the
// byte offset (syntax errors) or the field name (schema errors).
Query parse_query(std::string_view text, bool strict = true);

}  // namespace privstream

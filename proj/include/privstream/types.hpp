#pragma once

#include <algorithm>
#include <cstdint>

namespace privstream {

// Milliseconds since the Unix epoch, UTC.
using TimestampMs = std::int64_t;
using DurationMs = std::int64_t;

// Epoch index of an instant relative to a query's start. Instants before the
// start count as epoch 0 so indices stay nonnegative.
inline std::int64_t epoch_index_at(TimestampMs now, TimestampMs t_start,
                                   DurationMs epoch_ms) {
  if (epoch_ms <= 0 || now <= t_start) return 0;
  return (now - t_start) / epoch_ms;
}

// Number of distinct epoch indices that can still produce a submission in
// [max(now, t_start), t_end).
inline std::int64_t epochs_remaining(TimestampMs now, TimestampMs t_start,
                                     TimestampMs t_end, DurationMs epoch_ms) {
  if (epoch_ms <= 0) return 0;
  const TimestampMs from = std::max(now, t_start);
  if (t_end <= from) return 0;
  const std::int64_t first = epoch_index_at(from, t_start, epoch_ms);
  const std::int64_t last = epoch_index_at(t_end - 1, t_start, epoch_ms);
  return last - first + 1;
}

}  // namespace privstream

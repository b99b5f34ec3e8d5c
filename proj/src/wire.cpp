#include "privstream/wire.hpp"

#include "json.hpp"
#include "json_util.hpp"
#include "privstream/errors.hpp"

namespace privstream {

using nlohmann::json;
using detail::parse_document;
using detail::reject_unknown_fields;
using detail::require_field;
using detail::require_int;
using detail::require_number;
using detail::require_string;
using detail::require_uint;

const char* to_string(AcceptReason reason) {
  switch (reason) {
    case AcceptReason::ok:
      return "ok";
    case AcceptReason::length_mismatch:
      return "length_mismatch";
    case AcceptReason::malformed_bits:
      return "malformed_bits";
    case AcceptReason::duplicate:
      return "duplicate";
    case AcceptReason::epoch_out_of_window:
      return "epoch_out_of_window";
    case AcceptReason::expired:
      return "expired";
    case AcceptReason::unknown_query:
      return "unknown_query";
    case AcceptReason::parse_error:
      return "parse_error";
  }
  return "unknown";
}

std::string serialize_submission(const Submission& submission) {
  json doc;
  doc["bits"] = submission.bits;
  doc["epoch_index"] = submission.epoch_index;
  doc["pseudonym"] = submission.pseudonym;
  doc["query_id"] = submission.query_id;
  doc["sent_at"] = submission.sent_at;
  return doc.dump();
}

Submission parse_submission(std::string_view text, bool strict) {
  json doc = parse_document(text);
  if (!doc.is_object()) {
    throw ParseError("submission must be a JSON object");
  }
  if (strict) {
    reject_unknown_fields(
        doc, {"bits", "epoch_index", "pseudonym", "query_id", "sent_at"},
        "submission");
  }
  Submission s;
  s.query_id = require_string(doc, "query_id");
  s.pseudonym = require_string(doc, "pseudonym");
  s.epoch_index = require_int(doc, "epoch_index");
  s.sent_at = require_int(doc, "sent_at");
  const json& bits = require_field(doc, "bits");
  if (!bits.is_array()) {
    throw ParseError("field `bits` must be an array", 0, "bits");
  }
  s.bits.reserve(bits.size());
  for (const json& b : bits) {
    if (!b.is_number_integer()) {
      throw ParseError("field `bits` must contain integers", 0, "bits");
    }
    std::int64_t v = b.get<std::int64_t>();
    if (v < 0 || v > 255) {
      throw ParseError("field `bits` element out of byte range", 0, "bits");
    }
    s.bits.push_back(static_cast<std::uint8_t>(v));
  }
  return s;
}

std::string serialize_batch_estimate(const BatchEstimate& estimate) {
  json doc;
  json arr = json::array();
  for (const IndexEstimate& e : estimate.estimates) {
    json item;
    item["index"] = e.index;
    item["stddev"] = e.stddev;
    item["y_clamped"] = e.y_clamped;
    item["y_raw"] = e.y_raw;
    arr.push_back(std::move(item));
  }
  doc["estimates"] = std::move(arr);
  doc["n_answers"] = estimate.n_answers;
  doc["query_id"] = estimate.query_id;
  doc["window_end_ms"] = estimate.window_end_ms;
  doc["window_start_ms"] = estimate.window_start_ms;
  return doc.dump();
}

BatchEstimate parse_batch_estimate(std::string_view text) {
  json doc = parse_document(text);
  if (!doc.is_object()) {
    throw ParseError("batch estimate must be a JSON object");
  }
  BatchEstimate b;
  b.query_id = require_string(doc, "query_id");
  b.window_start_ms = require_int(doc, "window_start_ms");
  b.window_end_ms = require_int(doc, "window_end_ms");
  b.n_answers = require_uint(doc, "n_answers");
  const json& arr = require_field(doc, "estimates");
  if (!arr.is_array()) {
    throw ParseError("field `estimates` must be an array", 0, "estimates");
  }
  b.estimates.reserve(arr.size());
  for (const json& item : arr) {
    IndexEstimate e;
    e.index = require_uint(item, "index");
    e.y_raw = require_number(item, "y_raw");
    e.y_clamped = require_number(item, "y_clamped");
    e.stddev = require_number(item, "stddev");
    b.estimates.push_back(e);
  }
  return b;
}

void append_frame(std::string& out, std::string_view payload) {
  if (payload.size() > 0xffffffffu) {
    throw EncodingError("frame payload exceeds 4 GiB length prefix");
  }
  auto len = static_cast<std::uint32_t>(payload.size());
  out.push_back(static_cast<char>((len >> 24) & 0xff));
  out.push_back(static_cast<char>((len >> 16) & 0xff));
  out.push_back(static_cast<char>((len >> 8) & 0xff));
  out.push_back(static_cast<char>(len & 0xff));
  out.append(payload.data(), payload.size());
}

void FrameReader::append(const char* data, std::size_t size) {
  buffer_.append(data, size);
}

std::optional<std::string> FrameReader::next() {
  // Reclaim consumed prefix once it dominates the buffer.
  if (offset_ > 4096 && offset_ * 2 > buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  if (buffer_.size() - offset_ < 4) {
    return std::nullopt;
  }
  const auto* u = reinterpret_cast<const unsigned char*>(buffer_.data());
  std::uint32_t len = (static_cast<std::uint32_t>(u[offset_]) << 24) |
                      (static_cast<std::uint32_t>(u[offset_ + 1]) << 16) |
                      (static_cast<std::uint32_t>(u[offset_ + 2]) << 8) |
                      static_cast<std::uint32_t>(u[offset_ + 3]);
  if (len > max_frame_bytes_) {
    throw ParseError("frame length " + std::to_string(len) +
                     " exceeds limit " + std::to_string(max_frame_bytes_));
  }
  if (buffer_.size() - offset_ < 4 + static_cast<std::size_t>(len)) {
    return std::nullopt;
  }
  std::string payload = buffer_.substr(offset_ + 4, len);
  offset_ += 4 + static_cast<std::size_t>(len);
  return payload;
}

}  // namespace privstream

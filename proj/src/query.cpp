#include "privstream/query.hpp"

#include <algorithm>
#include <limits>

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

std::string ValidationReport::to_string() const {
  if (ok()) return "ok";
  std::string out;
  for (const auto& v : violations) {
    out += v.field;
    out += ": ";
    out += v.message;
    out += '\n';
  }
  return out;
}

ValidationReport validate_query(const Query& query, TimestampMs now) {
  ValidationReport report;

  if (query.query_id.empty()) report.add("query_id", "must not be empty");
  if (query.analyst_id.empty()) report.add("analyst_id", "must not be empty");
  if (query.sensor.empty()) report.add("sensor", "must not be empty");

  const auto& buckets = query.buckets;
  if (buckets.empty()) {
    report.add("buckets", "bucket list is empty");
  } else {
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      if (buckets[i].hi.has_value() && !(*buckets[i].hi > buckets[i].lo))
        report.add("buckets", "bucket " + std::to_string(i) + " is empty (hi <= lo)");
    }
    for (std::size_t i = 0; i + 1 < buckets.size(); ++i) {
      if (buckets[i + 1].lo < buckets[i].lo)
        report.add("buckets", "buckets " + std::to_string(i) + " and " +
                                  std::to_string(i + 1) + " are not sorted ascending");
    }
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      for (std::size_t j = i + 1; j < buckets.size(); ++j) {
        const double hi_i = buckets[i].hi.value_or(inf);
        const double hi_j = buckets[j].hi.value_or(inf);
        if (buckets[i].lo < hi_j && buckets[j].lo < hi_i)
          report.add("buckets", "buckets " + std::to_string(i) + " and " +
                                    std::to_string(j) + " overlap");
      }
    }
  }

  const auto& p = query.params;
  if (!(p.p > 0.0 && p.p <= 1.0)) {
    report.add("p", "first-coin probability must lie in (0, 1]");
  } else if (p.p < p.p_min) {
    report.add("p", "first-coin probability below the configured floor " +
                        std::to_string(p.p_min));
  }
  if (!(p.q >= 0.0 && p.q <= 1.0))
    report.add("q", "second-coin probability must lie in [0, 1]");

  if (!(query.epoch_seconds > 0.0)) report.add("epoch_seconds", "must be positive");

  if (query.t_end <= query.t_start) report.add("t_end", "must be after t_start");
  if (query.t_end <= now) report.add("t_end", "query already expired");

  return report;
}

std::optional<std::size_t> bucket_index_of(double value, const Query& query) {
  // Buckets are sorted ascending by lo, so only the last bucket whose lo is
  // <= value can contain it.
  const auto& buckets = query.buckets;
  auto it = std::upper_bound(buckets.begin(), buckets.end(), value,
                             [](double v, const Bucket& b) { return v < b.lo; });
  if (it == buckets.begin()) return std::nullopt;
  --it;
  if (!it->contains(value)) return std::nullopt;
  return static_cast<std::size_t>(it - buckets.begin());
}

TruthfulAnswer encode_value(double value, const Query& query, std::int64_t epoch_index) {
  TruthfulAnswer answer;
  answer.query_id = query.query_id;
  answer.epoch_index = epoch_index;
  answer.bits.assign(query.n(), 0);
  if (auto idx = bucket_index_of(value, query)) answer.bits[*idx] = 1;
  return answer;
}

std::string serialize_query(const Query& query) {
  json buckets = json::array();
  for (const auto& b : query.buckets) {
    json jb;
    jb["lo"] = b.lo;
    if (b.hi.has_value()) {
      jb["hi"] = *b.hi;
    } else {
      jb["hi"] = nullptr;
    }
    buckets.push_back(std::move(jb));
  }
  json doc;
  doc["query_id"] = query.query_id;
  doc["analyst_id"] = query.analyst_id;
  doc["sensor"] = query.sensor;
  doc["buckets"] = std::move(buckets);
  doc["p"] = query.params.p;
  doc["q"] = query.params.q;
  doc["epoch_seconds"] = query.epoch_seconds;
  doc["t_start"] = query.t_start;
  doc["t_end"] = query.t_end;
  doc["signature"] = query.signature;
  return doc.dump();
}

Query parse_query(std::string_view text, bool strict) {
  const json doc = parse_document(text);
  if (!doc.is_object()) throw ParseError("query document must be a JSON object");
  if (strict)
    reject_unknown_fields(doc,
                          {"query_id", "analyst_id", "sensor", "buckets", "p", "q",
                           "epoch_seconds", "t_start", "t_end", "signature"},
                          "query document");

  Query query;
  query.query_id = require_string(doc, "query_id");
  query.analyst_id = require_string(doc, "analyst_id");
  query.sensor = require_string(doc, "sensor");

  const json& buckets = require_field(doc, "buckets");
  if (!buckets.is_array())
    throw ParseError("field `buckets` must be an array", 0, "buckets");
  for (const json& jb : buckets) {
    if (!jb.is_object())
      throw ParseError("each bucket must be an object with `lo` and `hi`", 0, "buckets");
    if (strict) reject_unknown_fields(jb, {"lo", "hi"}, "bucket");
    Bucket b;
    b.lo = require_number(jb, "lo");
    const json& hi = require_field(jb, "hi");
    if (hi.is_null()) {
      b.hi.reset();
    } else if (hi.is_number()) {
      b.hi = hi.get<double>();
    } else {
      throw ParseError("bucket field `hi` must be a number or null", 0, "hi");
    }
    query.buckets.push_back(b);
  }

  query.params.p = require_number(doc, "p");
  query.params.q = require_number(doc, "q");
  query.epoch_seconds = require_number(doc, "epoch_seconds");
  query.t_start = require_int(doc, "t_start");
  query.t_end = require_int(doc, "t_end");
  query.signature = require_string(doc, "signature");
  return query;
}

}  // namespace privstream

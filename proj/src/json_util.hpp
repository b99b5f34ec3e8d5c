#pragma once

// Internal helpers for strict JSON parsing with field-level errors.

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "privstream/errors.hpp"

namespace privstream::detail {

using nlohmann::json;

inline json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
}

inline const json& require_field(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) {
    throw ParseError(std::string("missing required field `") + name + "`", 0,
                     name);
  }
  return *it;
}

inline std::string require_string(const json& doc, const char* name) {
  const json& v = require_field(doc, name);
  if (!v.is_string()) {
    throw ParseError(std::string("field `") + name + "` must be a string", 0,
                     name);
  }
  return v.get<std::string>();
}

inline double require_number(const json& doc, const char* name) {
  const json& v = require_field(doc, name);
  if (!v.is_number()) {
    throw ParseError(std::string("field `") + name + "` must be a number", 0,
                     name);
  }
  return v.get<double>();
}

inline std::int64_t require_int(const json& doc, const char* name) {
  const json& v = require_field(doc, name);
  if (!v.is_number_integer()) {
    throw ParseError(std::string("field `") + name + "` must be an integer", 0,
                     name);
  }
  return v.get<std::int64_t>();
}

inline std::uint64_t require_uint(const json& doc, const char* name) {
  std::int64_t v = require_int(doc, name);
  if (v < 0) {
    throw ParseError(std::string("field `") + name + "` must be non-negative",
                     0, name);
  }
  return static_cast<std::uint64_t>(v);
}

inline void reject_unknown_fields(const json& doc,
                                  std::initializer_list<const char*> allowed,
                                  const char* where) {
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const char* name : allowed) {
      if (key == name) known = true;
    }
    if (!known) {
      throw ParseError(std::string("unknown field `") + key + "` in " + where,
                       0, key);
    }
  }
}

}  // namespace privstream::detail

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace privstream {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A (p, q, ...) value outside its allowed domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Structurally valid parameters combined into an impossible request,
// e.g. a received-ones count larger than the answer count.
class DomainError : public Error {
 public:
  using Error::Error;
};

// No randomization parameters satisfy the requested privacy target.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Relative error against a zero ground-truth count.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

// Malformed wire document. Carries the byte offset for syntax errors and
// the offending field name for schema errors; either may be empty.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message, std::size_t byte_offset = 0,
                      std::string field = {})
      : Error(message), byte_offset_(byte_offset), field_(std::move(field)) {}

  std::size_t byte_offset() const { return byte_offset_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t byte_offset_;
  std::string field_;
};

// Submission or subscription for a query id nobody registered.
class RoutingError : public Error {
 public:
  using Error::Error;
};

// Requested simulation does not fit in the configured memory budget.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& message, std::uint64_t required_bytes)
      : Error(message), required_bytes_(required_bytes) {}
  std::uint64_t required_bytes() const { return required_bytes_; }

 private:
  std::uint64_t required_bytes_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace privstream

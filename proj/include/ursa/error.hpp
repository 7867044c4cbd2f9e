#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ursa {

// Precondition or shape violation by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad command-line flags or configuration values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Anything wrong with input files or their contents.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed bytes. `offset` is the position where decoding failed.
class ParseError : public DataError {
 public:
  ParseError(const std::string& reason, std::size_t offset)
      : DataError(reason + " (at byte offset " + std::to_string(offset) + ")"),
        reason_(reason),
        offset_(offset) {}

  const std::string& reason() const noexcept { return reason_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string reason_;
  std::size_t offset_;
};

// Well-formed bytes whose values break an invariant (label range, empty set).
class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

// Training produced a non-finite loss or parameter.
class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace ursa

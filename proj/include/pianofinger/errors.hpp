#pragma once

#include <stdexcept>
#include <string>

namespace pianofinger {

// Malformed input text (PIG lines, manifests, config files).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Value outside its domain (pitch off the keyboard, finger out of 1..5).
class RangeError : public std::runtime_error {
 public:
  explicit RangeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Records that contradict each other (channel vs. finger sign, duplicate notes).
class ConsistencyError : public std::runtime_error {
 public:
  explicit ConsistencyError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke an interface precondition (length mismatch, bad prefix).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// NaN/Inf escaped a numeric op, or a checkpoint failed to round-trip.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pianofinger

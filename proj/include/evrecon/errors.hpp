#pragma once

#include <stdexcept>
#include <string>

namespace evrecon {

// Input data is malformed, inconsistent or unreadable (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration does not match a stored artifact, e.g. a weight file (exit 2).
class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite values appeared during a numeric procedure (exit 3).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or frame dimensions disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace evrecon

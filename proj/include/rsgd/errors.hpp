#pragma once

#include <stdexcept>
#include <string>

namespace rsgd {

// Shape/size mismatches between ambient arrays and a manifold descriptor.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Violated preconditions on manifold-valued arguments (base mismatch,
// descriptor mismatch, invalid point data).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Requested operation has no implementation for the given manifold.
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration values (schedules, experiment configs, CLI input).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input files (LIBSVM, CSV, JSON payloads).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or numerically impossible operations at run time.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg, long iteration = -1)
      : std::runtime_error(msg), iteration(iteration) {}
  long iteration;
};

// A retraction or factorization produced a rank-deficient representation.
struct RankDeficiencyError : NumericError {
  using NumericError::NumericError;
};

}  // namespace rsgd

#pragma once

#include <stdexcept>
#include <string>

namespace ura {

/// Invalid configuration or precondition violation (bad bounds, dimension
/// mismatch, out-of-range parameter). Maps to CLI exit code 2.
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Linear-algebra breakdown (non-SPD covariance, failed factorization).
/// The message carries the offending diagnostics. Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// An objective returned a non-finite value; the message carries the point.
/// Maps to CLI exit code 3.
struct EvaluationError : std::runtime_error {
  explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ura

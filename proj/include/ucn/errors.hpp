#pragma once

#include <stdexcept>
#include <string>

namespace ucn {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid dimensions, powers, or other configuration values.
struct ConfigError : Error {
  using Error::Error;
};

/// Operands whose block shapes do not conform.
struct DimensionError : Error {
  using Error::Error;
};

/// A numerical operation left its domain (non-finite logdet, failed
/// Cholesky of a matrix that should be positive definite, ...).
struct NumericalError : Error {
  using Error::Error;
};

/// Retraction candidate with (numerically) zero power at a constrained
/// base station. Signals a pathological search step.
struct DegenerateRetractionError : Error {
  using Error::Error;
};

/// A closed-form baseline cannot be formed for the given dimensions.
struct BaselineInfeasibleError : Error {
  using Error::Error;
};

/// Malformed structured-text input. Carries the 1-based line number.
struct ParseError : Error {
  ParseError(const std::string& msg, int line_number)
      : Error(msg + " (line " + std::to_string(line_number) + ")"),
        line(line_number) {}
  int line;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace ucn

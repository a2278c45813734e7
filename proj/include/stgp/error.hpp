#pragma once

#include <stdexcept>
#include <string>

namespace stgp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violation on caller-supplied values (sizes, ranges, signs).
class InputError : public Error {
 public:
  using Error::Error;
};

class DuplicateLocationError : public InputError {
 public:
  using InputError::InputError;
};

/// Time stamps supplied out of order.
class TimeOrderError : public InputError {
 public:
  using InputError::InputError;
};

/// Raised by the numerical core when a matrix that must be positive definite
/// (innovation covariance, Gram matrix, sampled kernel) cannot be factorized.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConditioningError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InstabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnsupportedExactFactorization : public Error {
 public:
  using Error::Error;
};

class ApproximationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UndefinedFitError : public InputError {
 public:
  using InputError::InputError;
};

/// Malformed configuration or data file. `line` is 1-based when known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace stgp

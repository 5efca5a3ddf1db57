#pragma once

#include <stdexcept>
#include <string>

namespace superexp {

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Evaluation at a pole of the gamma function (non-positive integer).
class PoleError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A series or iteration exhausted its term budget.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Boundary behavior incompatible with the shape parameter nu.
class BoundaryError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Parameter sampling rejected too many draws to be trusted.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data; carries the 1-based row when known.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what, long row = 0)
      : std::runtime_error(row > 0 ? what + " (row " + std::to_string(row) + ")" : what),
        row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

}  // namespace superexp

#pragma once

#include <stdexcept>
#include <string>

namespace dpsk {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (dimension mismatch, bad index, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// An iterative kernel failed to converge within its cap.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

/// A least-squares system whose coefficient matrix is numerically rank deficient.
class IllPosedSystem : public Error {
 public:
  IllPosedSystem(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated serialized data. The message names the offset or line.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A privacy or accuracy parameter outside the domain of a threshold formula.
class ParameterDomainError : public Error {
 public:
  using Error::Error;
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

/// A streamed row or column was delivered twice to a one-pass mechanism.
class OnePassViolation : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// The streamed matrix (or its lift) does not clear the spectral threshold that
/// the privacy guarantee requires.
class GuardViolation : public Error {
 public:
  using Error::Error;
};

/// Command-line usage problem; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpsk

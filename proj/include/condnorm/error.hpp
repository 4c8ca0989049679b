#pragma once

#include <stdexcept>
#include <string>

namespace condnorm {

// Root of the library's exception hierarchy. Each subclass corresponds to
// one failure class; the CLI maps them onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class BasisError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class BootstrapError : public Error {
 public:
  using Error::Error;
};

/// Raised when PIRLS fails to converge. Carries the last iterate's state.
class FitError : public Error {
 public:
  FitError(const std::string& what, int iterations, double deviance,
           double relative_change)
      : Error(what),
        iterations_(iterations),
        deviance_(deviance),
        relative_change_(relative_change) {}
  explicit FitError(const std::string& what) : FitError(what, 0, 0.0, 0.0) {}

  int iterations() const { return iterations_; }
  double deviance() const { return deviance_; }
  double relative_change() const { return relative_change_; }

 private:
  int iterations_;
  double deviance_;
  double relative_change_;
};

}  // namespace condnorm

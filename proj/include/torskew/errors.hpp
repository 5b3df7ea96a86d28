#pragma once

#include <stdexcept>
#include <string>

namespace torskew {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: non-finite angles, bad dimensions, malformed parameters.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A skewing or family constraint is violated (e.g. sum |lambda_j| > 1).
class ConstraintError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Quadrature failed to converge, or a numerical certificate could not be established.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

/// Requested work exceeds the configured budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampler envelope is too loose or was violated.
class EnvelopeError : public AccuracyError {
 public:
  EnvelopeError(const std::string& what, double max_density_estimate)
      : AccuracyError(what), max_density_estimate_(max_density_estimate) {}
  double max_density_estimate() const { return max_density_estimate_; }

 private:
  double max_density_estimate_;
};

}  // namespace torskew

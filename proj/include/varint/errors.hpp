#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace varint {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Polynomial index outside [0, s).
class BasisIndexError : public Error {
 public:
  using Error::Error;
};

/// A parameter outside its supported range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mismatched vector or matrix sizes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Evaluation too close to a singular point of the system.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// The Legendre transformation p <-> qdot could not be inverted.
class TransformError : public Error {
 public:
  using Error::Error;
};

/// An identity that must hold by construction was violated.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// The stage solver ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Stage values became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Wraps a stepping failure with the index of the failed step.
class StepError : public Error {
 public:
  StepError(std::size_t step, const std::string& cause)
      : Error("step " + std::to_string(step) + ": " + cause), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace varint

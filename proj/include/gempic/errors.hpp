#pragma once

#include <stdexcept>
#include <string>

namespace gempic {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid construction parameters (degree, grid size, map constants).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Evaluation point outside the logical cube.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Coefficient vector or matrix of the wrong size.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Jacobian determinant vanished where it was needed.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, breakdown or divergence in a numerical routine.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A particle moved too far in one substep to be tracked unambiguously.
class StepTooLargeError : public Error {
 public:
  using Error::Error;
};

// Internal bookkeeping that contradicts itself, such as a bad crossing record.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Bad or unknown configuration input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gempic

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlsysid {

// Root of every error raised by the library. The CLI maps ConfigError to
// exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller (bad dimension,
// nonpositive physical parameter, unbounded polytope where a bounded one is
// required, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

// State norm exceeded the hard ceiling (or became non-finite) during
// simulation.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, double norm)
      : Error("simulation diverged at t=" + std::to_string(step) +
              " (|x|_2 = " + std::to_string(norm) + ")"),
        step_(step),
        norm_(norm) {}

  std::size_t step() const { return step_; }
  double norm() const { return norm_; }

 private:
  std::size_t step_;
  double norm_;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

// The set-membership polytope became empty: the data are inconsistent with
// the configured disturbance bound.
class NoiseBoundViolation : public Error {
 public:
  using Error::Error;
};

class EstimationFailure : public Error {
 public:
  using Error::Error;
};

// A closed-form bound is evaluated outside the range where it is claimed.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlsysid

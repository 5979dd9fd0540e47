#pragma once

#include <stdexcept>
#include <string>

namespace opo {

// Every failure raised by the core derives from Error so the C API can map
// it onto a status code in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input (out-of-range parameters, inconsistent config).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Cavity g-products outside (0,1).
class StabilityError : public Error {
 public:
  using Error::Error;
};

class NoBracketError : public Error {
 public:
  using Error::Error;
};

// Evaluation at a pole of the linearized spectrum (Delta = 0, omega = 0).
class SingularityError : public Error {
 public:
  using Error::Error;
};

// Deterministic integrator left the physically sensible region.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Too many stochastic trajectories diverged for the ensemble to be trusted.
class DivergenceBudgetError : public Error {
 public:
  using Error::Error;
};

// One stochastic trajectory crossed the divergence threshold.
class TrajectoryDiverged : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class BelowThresholdError : public Error {
 public:
  using Error::Error;
};

class NoStationaryState : public Error {
 public:
  using Error::Error;
};

class InvalidRegime : public Error {
 public:
  using Error::Error;
};

}  // namespace opo

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace otg {

// Base of every error raised by the library. Callers that only need to know
// "the solve failed" catch this; the subclasses carry the details.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfBounds : public Error { using Error::Error; };
class NotAnEdge : public Error { using Error::Error; };
class NotNeighbors : public Error { using Error::Error; };
class DimensionMismatch : public Error { using Error::Error; };
class GridMismatch : public Error { using Error::Error; };
class NonFiniteValue : public Error { using Error::Error; };
class InvalidDensity : public Error { using Error::Error; };
class NonFiniteState : public Error { using Error::Error; };
class LinearSolveSingular : public Error { using Error::Error; };
class JacobianSingular : public Error { using Error::Error; };
class JacobianIncomplete : public Error { using Error::Error; };
class MaxIterationsExceeded : public Error { using Error::Error; };
class KindMismatch : public Error { using Error::Error; };
class UnknownExample : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class OracleCapExceeded : public Error { using Error::Error; };

// Raised when an initial value problem leaves the finite/bounded regime.
// `subinterval` is filled in by the shooting layer (-1 when unknown).
class TrajectoryBlowUp : public Error {
 public:
  TrajectoryBlowUp(double t_fail, const std::string& what, int subinterval = -1)
      : Error(what), t_fail_(t_fail), subinterval_(subinterval) {}
  double t_fail() const noexcept { return t_fail_; }
  int subinterval() const noexcept { return subinterval_; }

 private:
  double t_fail_;
  int subinterval_;
};

class ContinuationStalled : public Error {
 public:
  ContinuationStalled(double last_lambda, const std::string& cause)
      : Error("continuation stalled after lambda=" + std::to_string(last_lambda) + ": " + cause),
        last_lambda_(last_lambda),
        cause_(cause) {}
  double last_lambda() const noexcept { return last_lambda_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  double last_lambda_;
  std::string cause_;
};

}  // namespace otg

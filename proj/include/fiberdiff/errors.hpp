#pragma once

#include <stdexcept>
#include <string>

namespace fiberdiff {

/// A physical hypothesis of the model is violated, e.g. the lift factor
/// 1 - kappa v reaches zero somewhere on a fiber. Carries the location.
class InvariantViolation : public std::domain_error {
 public:
  InvariantViolation(const std::string& what, std::string location = {})
      : std::domain_error(location.empty() ? what : what + " at " + location),
        location_(std::move(location)) {}

  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

/// Fiber quadrature did not settle before the maximum order was reached.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solve or time-step configuration failure.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fiberdiff

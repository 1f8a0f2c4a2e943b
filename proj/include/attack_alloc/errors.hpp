#pragma once

#include <stdexcept>
#include <string>

namespace attack_alloc {

/// Iterative solver ran out of budget. Carries the last convergence measure.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_measure, int iterations)
      : std::runtime_error(what + " (last measure " + std::to_string(last_measure) +
                           " after " + std::to_string(iterations) + " iterations)"),
        last_measure_(last_measure),
        iterations_(iterations) {}

  double last_measure() const noexcept { return last_measure_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double last_measure_;
  int iterations_;
};

/// The index balance equation is too ill-conditioned at this holding time.
class NumericallyUnreliable : public std::runtime_error {
 public:
  NumericallyUnreliable(int j, double conditioning)
      : std::runtime_error("index at j=" + std::to_string(j) +
                           " is numerically unreliable (conditioning " +
                           std::to_string(conditioning) + ")"),
        j_(j),
        conditioning_(conditioning) {}

  int j() const noexcept { return j_; }
  double conditioning() const noexcept { return conditioning_; }

 private:
  int j_;
  double conditioning_;
};

/// An optimal policy lacks the structure the theory guarantees.
class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicitly refused work (memory ceiling, infeasible request).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace attack_alloc

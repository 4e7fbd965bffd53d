#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bcbf {

/// Sample count below the minimum required by the selected risk bound.
class InsufficientSamples : public std::invalid_argument {
 public:
  InsufficientSamples(std::size_t required, std::size_t actual)
      : std::invalid_argument("requires N >= " + std::to_string(required) + " (got " +
                              std::to_string(actual) + ")"),
        required_(required),
        actual_(actual) {}

  std::size_t required() const noexcept { return required_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t required_;
  std::size_t actual_;
};

/// A sample fell below the essential lower bound b of a CVaR/expectation bound.
class EssentialLowerBoundViolated : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// No order-statistic index satisfies the binomial confidence condition.
class NoValidIndex : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Barrier geometry where the barrier is not differentiable (e.g. coincident centres).
class DegenerateGeometry : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The composed barrier is already non-positive, so the 1/h terms are undefined.
class BarrierNonpositive : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace bcbf

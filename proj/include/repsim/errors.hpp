#pragma once

#include <stdexcept>
#include <string>

namespace repsim {

// Linear solve or exponential that did not meet its accuracy target.
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Protocol whose success probability vanishes or whose retry series diverges.
class DegenerateProtocol : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// State with no weight in the logical subspace of a key encoding.
class DegenerateEncoding : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Monte Carlo trajectory exceeded the configured simulated-time budget.
class McTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace repsim

#pragma once

#include <stdexcept>
#include <string>

namespace shotcorr {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration (bad grid, inconsistent parameters, malformed input).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure did not reach its tolerance. Carries the partial
// value and the error estimate at the point it gave up.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double partial_value, double error_estimate)
      : std::runtime_error(what), partial_value_(partial_value), error_estimate_(error_estimate) {}

  double partial_value() const noexcept { return partial_value_; }
  double error_estimate() const noexcept { return error_estimate_; }

 private:
  double partial_value_;
  double error_estimate_;
};

}  // namespace shotcorr

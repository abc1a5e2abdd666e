#pragma once

#include <stdexcept>
#include <string>

namespace gaussroots {

// Precondition on user-supplied arguments was violated.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An integral that should be finite is not (exponential growth beats the density tail).
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double error_estimate)
      : std::runtime_error(what + " (error estimate " + std::to_string(error_estimate) + ")"),
        error_estimate_(error_estimate) {}

  double error_estimate() const noexcept { return error_estimate_; }

 private:
  double error_estimate_;
};

// A matrix that must be inverted is singular to working precision.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A contour passed too close to a zero of the field; the caller should perturb the radius.
class ContourRetry : public std::runtime_error {
 public:
  ContourRetry(const std::string& what, double min_modulus)
      : std::runtime_error(what), min_modulus_(min_modulus) {}

  double min_modulus() const noexcept { return min_modulus_; }

 private:
  double min_modulus_;
};

}  // namespace gaussroots

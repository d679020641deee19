#pragma once

#include <stdexcept>
#include <string>

namespace bwc {

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegeneratePolarError : public NumericalError {
 public:
  DegeneratePolarError(double sigma_min)
      : NumericalError("degenerate polar decomposition, sigma_min = " + std::to_string(sigma_min)),
        sigma_min(sigma_min) {}
  double sigma_min;
};

class StalenessError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace bwc

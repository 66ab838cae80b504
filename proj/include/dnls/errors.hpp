#pragma once

#include <stdexcept>
#include <string>

namespace dnls {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two operands live on different lattices.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

// Bad input: out-of-range parameters, malformed configuration, violated
// preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure did not reach its tolerance (Newton failure, bad
// extrapolation ladder, NaN in a trajectory, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dnls

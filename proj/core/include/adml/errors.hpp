#pragma once

#include <stdexcept>
#include <string>

namespace adml {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied inputs that violate a precondition (shapes, ranges, NaNs).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// The estimating equations have no (unique) solution on this sample,
// e.g. the residualized treatment is identically zero.
class DegenerateDesign : public Error {
 public:
  using Error::Error;
};

// Coordinate descent hit its sweep limit.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double duality_gap)
      : Error(what), duality_gap_(duality_gap) {}

  double duality_gap() const noexcept { return duality_gap_; }

 private:
  double duality_gap_;
};

}  // namespace adml

#pragma once

#include <stdexcept>
#include <string>

namespace phasect {

/// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Iterative method stopped without meeting its tolerance. `last_value`
/// is the final iterate's scalar summary (norm estimate, objective, ...).
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iteration, double last_value)
      : Error(what), iteration_(iteration), last_value_(last_value) {}

  int iteration() const noexcept { return iteration_; }
  double last_value() const noexcept { return last_value_; }

 private:
  int iteration_;
  double last_value_;
};

/// Image generator could not meet its sparsity target.
class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, long achieved)
      : Error(what), achieved_(achieved) {}

  long achieved() const noexcept { return achieved_; }

 private:
  long achieved_;
};

}  // namespace phasect

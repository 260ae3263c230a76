#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tailcut {

// Error taxonomy. The CLI maps each family onto a process exit code:
// ArgumentError -> 2, DataError -> 3, NumericError -> 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `row` is the 1-based line number, 0 when the
/// problem is not tied to a line (empty file, unreadable path).
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t row)
      : DataError(row == 0 ? what : "row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class LookupError : public DataError {
 public:
  using DataError::DataError;
};

/// Change rate requested against a zero previous objective.
class SingularObjectiveError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Normal matrix of a polynomial fit is singular (too few distinct abscissae).
class RankDeficiencyError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// An EM component received zero total responsibility.
class DegenerateComponentError : public NumericError {
 public:
  DegenerateComponentError(const std::string& what, std::size_t component)
      : NumericError(what), component_(component) {}
  std::size_t component() const noexcept { return component_; }

 private:
  std::size_t component_;
};

}  // namespace tailcut

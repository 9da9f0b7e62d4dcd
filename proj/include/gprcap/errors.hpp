#pragma once

#include <stdexcept>
#include <string>

namespace gprcap {

// Three families map onto the CLI exit codes: validation (2), numerical (3), I/O (4).

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyInput : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonPositiveTemperature : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class BelowAbsoluteZero : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonPositiveBase : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TooShort : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class TooFewPairs : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnknownCase : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class OverlappingSplit : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : ValidationError("parse error at row " + std::to_string(row) + ", column " +
                        std::to_string(column) + ": " + what),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class NotPositiveDefinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularTriangular : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AllStartsFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace gprcap

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace riskdiff {

// Base of every error raised by the library. Callers that only need a
// message can catch this; the subclasses carry structured context.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  SingularMatrixError(std::size_t pivot, double value)
      : Error("matrix is not positive definite: pivot " + std::to_string(pivot) +
              " = " + std::to_string(value)),
        pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(std::string column)
      : Error("missing column: " + column), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// A covariate of the wrong kind was handed to an operation.
class CovariateTypeError : public Error {
 public:
  using Error::Error;
};

class DesignError : public Error {
 public:
  using Error::Error;
};

class DegenerateTableError : public Error {
 public:
  using Error::Error;
};

class StratumStructureError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class DegenerateLeverageError : public Error {
 public:
  explicit DegenerateLeverageError(std::size_t row)
      : Error("unit leverage at row " + std::to_string(row)), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class BootstrapFailure : public Error {
 public:
  BootstrapFailure(std::size_t successes, std::size_t failures)
      : Error("bootstrap failed: " + std::to_string(successes) + " successful and " +
              std::to_string(failures) + " failed replicates"),
        successes_(successes),
        failures_(failures) {}
  std::size_t successes() const noexcept { return successes_; }
  std::size_t failures() const noexcept { return failures_; }

 private:
  std::size_t successes_;
  std::size_t failures_;
};

class DegenerateInversionError : public Error {
 public:
  using Error::Error;
};

class BracketError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Raised for invalid combinations of user-facing options (CLI exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace riskdiff

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dirlink {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input that is well-formed but unusable (empty graph, infeasible sample count, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes or indices that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A training run that could not complete (non-finite loss, misuse of the tape, ...).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace dirlink

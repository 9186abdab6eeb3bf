#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cfd {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or record. Carries the 1-based line number when known.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Precondition or configuration violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File system failure (missing file, unwritable output).
class IoError : public Error {
 public:
  using Error::Error;
};

// A model could not be trained from the given data.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A token overlaps both the antecedent and the consequent.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfd

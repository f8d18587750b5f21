#ifndef BINMR_ERRORS_HPP
#define BINMR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace binmr {

/// Malformed or inconsistent input data (shapes, labels, files, coverage).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A text input could not be parsed; carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Unknown category / label / dataset identifier.
class LookupError : public DataError {
 public:
  using DataError::DataError;
};

/// Some fine category cannot be estimated from the available fine-resolution rows.
class CoverageError : public DataError {
 public:
  using DataError::DataError;
};

/// The optimizer produced a non-finite objective or could not make progress.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace binmr

#endif  // BINMR_ERRORS_HPP

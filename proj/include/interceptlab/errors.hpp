#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace interceptlab {

// Root of every exception thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (non-symmetric covariance,
// non-unit direction vector, ...).
struct ContractViolation : Error {
  using Error::Error;
};

// A numeric parameter is outside its admissible range.
struct ParameterError : Error {
  using Error::Error;
};

// Innovation covariance could not be factored even after flooring.
struct FilterDivergence : Error {
  using Error::Error;
};

struct ScenarioError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct MetricError : Error {
  using Error::Error;
};

struct TuningError : Error {
  using Error::Error;
};

struct GenerationError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace interceptlab

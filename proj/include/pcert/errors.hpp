#pragma once

#include <stdexcept>
#include <string>

namespace pcert {

// Shape/argument violations are programming errors at the call site.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad or inconsistent on-disk input.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BaselineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a training run blows up; carries the failing iteration.
struct DivergenceError : std::runtime_error {
  long iteration;
  DivergenceError(const std::string& msg, long iter)
      : std::runtime_error(msg), iteration(iter) {}
};

}  // namespace pcert

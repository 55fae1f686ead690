#pragma once

#include <stdexcept>
#include <string>

namespace trajtensor {

// Invalid argument values (degenerate boxes, negative sigma, bad indices).
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Tensor / parameter dimension mismatches. Message names expected vs actual.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A metric was asked to score a pool with no positive ground-truth labels.
struct NoPositivesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation called out of order (e.g. backward before forward).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad run or scenario configuration. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or inconsistent data on disk. CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : DataError {
  ParseError(const std::string& what, long line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
  long line_number;
};

}  // namespace trajtensor

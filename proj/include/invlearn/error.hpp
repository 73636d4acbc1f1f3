#pragma once

#include <stdexcept>
#include <string>

namespace invlearn {

// Malformed input file; message names the offending line.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration value (ratios, learning rates, thresholds).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Empty or insufficient data, exhausted sampling domains.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// User or item id outside the model's tables.
struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched buffer shapes between parameters, gradients or moments.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite or out-of-range numeric input.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric undefined on the given input (single class, no positives).
struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace invlearn

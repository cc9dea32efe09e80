#pragma once

#include <stdexcept>
#include <string>

namespace avwnet {

// Bad tensor/raster extents or incompatible operand shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Misuse of the differentiation graph (double backward, backward on a constant).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf in values or gradients, divergence during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, unreadable or malformed input files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or command-line values.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace avwnet

#pragma once

#include <stdexcept>
#include <string>

namespace nnv {

/// Input vector or matrix does not match the network / problem dimensions.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid user configuration (architecture, hyper-parameters, epsilon, ...).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed input file or dataset.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// MILP encoding could not be built soundly (e.g. inverted neuron bounds).
class EncodingError : public std::runtime_error {
 public:
  explicit EncodingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nnv

#pragma once

#include <stdexcept>
#include <string>

namespace centroid {

/// Invalid user input: bad parameters, malformed configuration, unwritable paths.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation could not produce a meaningful result (degenerate fit, empty window, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace centroid

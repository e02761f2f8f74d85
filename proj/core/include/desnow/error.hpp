#pragma once

#include <stdexcept>
#include <string>

namespace desnow {

/// Tensor extents do not satisfy an operation's precondition.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data (files, images, weights) is missing, malformed or inconsistent.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration document or option value is invalid.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace desnow

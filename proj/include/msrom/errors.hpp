#pragma once

#include <stdexcept>
#include <string>

namespace msrom {

/// Invalid configuration or input schema. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Solver breakdown, nonconvergence, rank deficiency. CLI exit code 1.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable or malformed files. CLI exit code 2.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace msrom

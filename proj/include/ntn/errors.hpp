#pragma once

#include <stdexcept>
#include <string>

namespace ntn {

/// Invalid or inconsistent configuration (grid geometry, tap tables, sweeps, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Input data violates an operation's preconditions (lengths, missing samples, ...).
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// A measurement or solve could not produce a usable result.
struct EstimationError : std::runtime_error {
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ntn

#pragma once

#include <stdexcept>
#include <string>

namespace bevguard {

/// Invalid user-supplied configuration (bad ranges, infeasible budgets, missing files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation received inputs that violate its preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not proceed (singular matrix, degenerate normalizer).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bevguard

#pragma once

#include <stdexcept>
#include <string>

namespace vascond {

/// Invalid input data: malformed files, unknown labels, bad geometry.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration that violates a documented invariant.
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

/// A linear solve that could not meet its residual contract.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a failed solve inside the time loop.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(long step, std::string field, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ", field '" + field + "': " + what),
        step_(step),
        field_(std::move(field)) {}

  long step() const noexcept { return step_; }
  const std::string& field() const noexcept { return field_; }

 private:
  long step_;
  std::string field_;
};

}  // namespace vascond

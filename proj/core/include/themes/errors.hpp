#pragma once

#include <stdexcept>
#include <string>

namespace themes {

// Bad user input: malformed files, invalid arguments, inconsistent configs.
// The CLI maps these to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical or algorithmic failure on valid input. CLI exit code 2.
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public InputError {
 public:
  using InputError::InputError;
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigurationError : public InputError {
 public:
  using InputError::InputError;
};

class FormatError : public InputError {
 public:
  FormatError(const std::string& message, std::size_t line)
      : InputError("line " + std::to_string(line) + ": " + message), line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConsistencyError : public ComputeError {
 public:
  using ComputeError::ComputeError;
};

class ConstructionError : public ComputeError {
 public:
  using ComputeError::ComputeError;
};

class NumericalError : public ComputeError {
 public:
  using ComputeError::ComputeError;
};

struct AdmmResiduals {
  double primal = 0.0;
  double dual = 0.0;
  int iterations = 0;
};

class ConvergenceError : public ComputeError {
 public:
  ConvergenceError(const std::string& message, AdmmResiduals last)
      : ComputeError(message), last_(last) {}

  [[nodiscard]] const AdmmResiduals& last_residuals() const noexcept { return last_; }

 private:
  AdmmResiduals last_;
};

class SamplerError : public ComputeError {
 public:
  SamplerError(const std::string& message, int step)
      : ComputeError(message + " (step " + std::to_string(step) + ")"), step_(step) {}

  [[nodiscard]] int step() const noexcept { return step_; }

 private:
  int step_;
};

class TrainingError : public ComputeError {
 public:
  TrainingError(const std::string& message, int epoch)
      : ComputeError(message + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

  [[nodiscard]] int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace themes

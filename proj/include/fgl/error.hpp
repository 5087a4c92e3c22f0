#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fgl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model or discretization parameter lies outside its admissible domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Operand dimensions do not match.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// The requested operation exceeds a configured capability (e.g. dense size limit).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual estimate " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Non-finite values appeared during time stepping.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = -1)
      : Error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  /// 1-based line in the config file, or -1 when not tied to a line.
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace fgl

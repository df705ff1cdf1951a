#pragma once

#include <stdexcept>
#include <string>

namespace tweezersim {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(key) {}
  explicit ConfigError(const std::string& what) : ConfigError("", what) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Numerical failure (CLI exit code 3). Carries the name of the module that
/// raised it.
class NumericError : public Error {
 public:
  NumericError(std::string module, const std::string& what)
      : Error(module + ": " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class TruncationError : public NumericError {
 public:
  explicit TruncationError(const std::string& what) : NumericError("core-state", what) {}
};

class StepSizeError : public NumericError {
 public:
  explicit StepSizeError(const std::string& what) : NumericError("dynamics", what) {}
};

class ResolutionError : public NumericError {
 public:
  explicit ResolutionError(const std::string& what) : NumericError("response", what) {}
};

class GridMismatchError : public NumericError {
 public:
  explicit GridMismatchError(const std::string& what) : NumericError("response", what) {}
};

class ConvergenceError : public NumericError {
 public:
  explicit ConvergenceError(const std::string& what) : NumericError("analysis", what) {}
};

class DegenerateFitError : public NumericError {
 public:
  explicit DegenerateFitError(const std::string& what) : NumericError("analysis", what) {}
};

class NonThermalError : public NumericError {
 public:
  explicit NonThermalError(const std::string& what) : NumericError("analysis", what) {}
};

/// File-system or parse failure on an input/output file (CLI exit code 4).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tweezersim

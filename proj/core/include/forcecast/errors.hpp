#pragma once

#include <stdexcept>
#include <string>

namespace forcecast {

/// Broad failure classes. The command-line tool maps these onto exit codes.
enum class ErrorKind {
  kConfig = 1,
  kData = 2,
  kDivergence = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(ErrorKind::kDivergence, what) {}
};

// Domain-specific errors; kept distinct so callers can catch exactly what they expect.

class InvalidQuaternionError : public DataError {
 public:
  using DataError::DataError;
};

class InvalidRotationError : public DataError {
 public:
  using DataError::DataError;
};

class UnreachablePoseError : public DataError {
 public:
  UnreachablePoseError(const std::string& what, double position_residual, double orientation_residual)
      : DataError(what),
        position_residual_(position_residual),
        orientation_residual_(orientation_residual) {}
  double position_residual() const noexcept { return position_residual_; }
  double orientation_residual() const noexcept { return orientation_residual_; }

 private:
  double position_residual_;
  double orientation_residual_;
};

class UnderdeterminedCalibrationError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Throws ConfigError with `message` when `condition` is false.
void require(bool condition, const std::string& message);

}  // namespace forcecast

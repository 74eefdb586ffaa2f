#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace koracle {

// Base for everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, violated preconditions, out-of-range config.
// The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Failure at run time (diverged loss, I/O, non-finite math).
// The CLI maps these to exit code 3.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class MalformedLine : public ValidationError {
 public:
  MalformedLine(std::size_t line_no, const std::string& what)
      : ValidationError("line " + std::to_string(line_no) + ": " + what),
        line_no_(line_no) {}
  std::size_t line_no() const { return line_no_; }

 private:
  std::size_t line_no_;
};

class UnknownShortcode : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonMonotonicTimestamp : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MixedCpu : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidWorkload : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyTrace : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ZeroVariance : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientData : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IndexOutOfRange : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyTestSet : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class TaskHeadDisabled : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptySeed : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class BadCheckpoint : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonFiniteActivation : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class DivergedLoss : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class IoFailure : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace koracle

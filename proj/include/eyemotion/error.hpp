#pragma once

#include <stdexcept>
#include <string>

namespace eyemotion {

/// Base class for every error the library raises. `kind()` is a stable,
/// machine-parseable tag that the CLI prints on failure.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Inconsistent model or run configuration (shape mismatch, bad sizes).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

/// Caller-supplied data violates an operation's preconditions.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error("input_error", what) {}
};

/// A serialized file (checkpoint, profile, PGM, manifest) is malformed.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format_error", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

/// NaN/Inf encountered in loss or gradients.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric_error", what) {}
};

/// A held-out participant leaked into a training split.
class LeakageError : public Error {
 public:
  explicit LeakageError(const std::string& what) : Error("leakage_error", what) {}
};

/// Violated internal invariant (e.g. backward without forward activations).
class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error("internal_error", what) {}
};

}  // namespace eyemotion

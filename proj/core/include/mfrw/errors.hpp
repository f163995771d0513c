// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mfrw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not agree with what an operation requires.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Caller supplied values outside an operation's domain (label index, width).
class InputError : public Error {
 public:
  using Error::Error;
};

/// An API was driven in an unsupported way (non-scalar backward root, missing gradient).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A forward computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The meta-loss gradient at the virtual model vanished, so no finite-difference
/// direction exists.
class DegenerateGradientError : public Error {
 public:
  using Error::Error;
};

/// Invalid noise pairing or group table.
class SpecError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Unknown configuration key or unparsable value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates an invariant; the message names the field path.
class ValidationError : public ConfigError {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : ConfigError(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mfrw

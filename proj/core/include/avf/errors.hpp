// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace avf {

/// Base of every error raised by the library. `exit_code()` is the process
/// status the command-line front end maps the error to.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual int exit_code() const noexcept { return 1; }
};

/// Shapes or axes that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A softmax row with no permitted positions.
class MaskingError : public Error {
 public:
  using Error::Error;
};

/// Violated call contract (non-scalar loss, mismatched stacks, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Bad user data: labels out of range, empty media, malformed records.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced during a forward or backward step, or a failed gradient check.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class FileError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace avf

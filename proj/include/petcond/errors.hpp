// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace petcond {

enum class ErrorKind {
  Config,      // invalid configuration or specification
  Constraint,  // requested count levels violate input < output
  Io,          // file system, parse, or format errors
  Numeric,     // non-finite values during training or evaluation
  Shape,       // tensor shape or dimension mismatch
  Lookup,      // missing entry (level not in table, missing parameter)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class ConstraintError : public Error {
 public:
  explicit ConstraintError(const std::string& what)
      : Error(ErrorKind::Constraint, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::Shape, what) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string& what) : Error(ErrorKind::Lookup, what) {}
};

/// Process exit code for an error kind: 2 config, 3 constraint, 4 I/O, 5 numeric.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Constraint:
      return 3;
    case ErrorKind::Io:
      return 4;
    case ErrorKind::Numeric:
      return 5;
    case ErrorKind::Config:
    case ErrorKind::Shape:
    case ErrorKind::Lookup:
      return 2;
  }
  return 1;
}

}  // namespace petcond

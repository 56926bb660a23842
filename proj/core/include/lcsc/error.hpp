// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exception types shared by every lcsc module. Each type maps onto one
// command-line exit code so the front end can translate failures without
// string matching.

#pragma once

#include <stdexcept>
#include <string>

namespace lcsc {

enum class ErrorKind {
  kConfig,     // invalid parameters, preconditions, schema mismatches
  kEvaluator,  // fitness evaluation failed
  kIo,         // file missing, malformed container or manifest
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

class EvaluatorError : public Error {
 public:
  explicit EvaluatorError(const std::string& what) : Error(ErrorKind::kEvaluator, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

/// Container bytes that do not follow the on-disk layout.
class FormatError : public IoError {
 public:
  explicit FormatError(const std::string& what) : IoError(what) {}
};

}  // namespace lcsc

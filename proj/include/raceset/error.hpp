// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace raceset {

enum class ErrorKind {
  SpaceMismatch,
  ArityMismatch,
  UndeclaredParameter,
  DisjunctLimit,
  UnboundedSearch,
  BoxTooLarge,
  Overflow,
  InvalidSet,
  SyntaxError,
  SsaViolation,
  UnknownOpcode,
  IrreducibleCfg,
  NonAffineBound,
  MultipleInductions,
  UnsupportedIdPattern,
  UnsupportedConstruct,
  StepLimitExceeded,
  OutOfBounds,
  CsrInvalid,
  InvalidModel,
  Io,
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

  Error(ErrorKind kind, const std::string& message, int line, int col)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " +
                           error_kind_name(kind) + ": " + message),
        kind_(kind),
        line_(line),
        col_(col) {}

  ErrorKind kind() const { return kind_; }
  int line() const { return line_; }
  int col() const { return col_; }

private:
  ErrorKind kind_;
  int line_ = 0;
  int col_ = 0;
};

}  // namespace raceset

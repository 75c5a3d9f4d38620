// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

#include <stdexcept>
#include <string>

namespace mrpo {

enum class ErrorKind {
  InvalidArgument,
  InvalidConfig,
  InvalidWeights,
  NumericInput,
  Parse,
  Encoding,
  Integrity,
  State,
  Io,
};

const char *to_string(ErrorKind kind);

// Every error raised by the library carries a kind so callers (the CLI in
// particular) can map it to a stable exit status.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string &what) {
  if (!condition) {
    fail(kind, what);
  }
}

} // namespace mrpo

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/errors.hpp"

namespace mrpo {

const char *to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::InvalidArgument:
    return "invalid-argument";
  case ErrorKind::InvalidConfig:
    return "invalid-config";
  case ErrorKind::InvalidWeights:
    return "invalid-weights";
  case ErrorKind::NumericInput:
    return "numeric-input";
  case ErrorKind::Parse:
    return "parse";
  case ErrorKind::Encoding:
    return "encoding";
  case ErrorKind::Integrity:
    return "integrity";
  case ErrorKind::State:
    return "state";
  case ErrorKind::Io:
    return "io";
  }
  return "unknown";
}

} // namespace mrpo

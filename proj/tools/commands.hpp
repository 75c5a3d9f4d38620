// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mrpo::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kIntegrity = 3,
  kDiverged = 4,
  kVerificationFailed = 5,
};

/// Parses `args` (without the program name) and runs the selected command.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace mrpo::cli

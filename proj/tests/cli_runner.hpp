// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

namespace mrpo::testing {

struct CommandResult {
  int exit_code = -1;
  std::string output; // stdout and stderr interleaved
};

inline std::string shell_quote(const std::string &s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

/// Runs the CLI binary with `args` (already shell-quoted where needed) in `cwd`.
inline CommandResult run_mrpo(const std::filesystem::path &cwd, const std::string &args) {
  const std::string cmd = "cd " + shell_quote(cwd.string()) + " && " +
                          shell_quote(MRPO_CLI) + " " + args + " 2>&1";
  CommandResult r;
  FILE *pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    return r;
  }
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    r.output.append(buf.data(), n);
  }
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// A fresh, empty scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string &name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mrpo_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace mrpo::testing

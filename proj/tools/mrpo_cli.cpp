// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mrpo::cli::run_cli(args, std::cout, std::cerr);
}

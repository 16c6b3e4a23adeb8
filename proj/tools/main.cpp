// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <iostream>

#include "aftunet/errors.hpp"
#include "cli.hpp"

int main(int argc, char** argv) {
  using namespace aft::cli;
  LogLevel level = LogLevel::kInfo;
  try {
    const char* env = std::getenv("AFT_LOG");
    level = parse_log_level(env ? env : "");
  } catch (const aft::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kExitUsage;
  }
  return run_cli({argv + 1, argv + argc}, std::cout, std::cerr, level);
}

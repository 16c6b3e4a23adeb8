// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aft::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

enum class LogLevel { kQuiet, kInfo, kDebug };

/// Parses an AFT_LOG value; empty means info. Throws ConfigError otherwise.
LogLevel parse_log_level(const std::string& value);

/// Runs one subcommand. `args` excludes the program name. Failures are
/// reported on `err` as a single "error: <kind>: <message>" line and mapped
/// to an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            LogLevel level = LogLevel::kInfo);

}  // namespace aft::cli

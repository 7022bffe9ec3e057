// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wearembed::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kUnwritable = 2,
  kTooFewUsers = 3,
  kDiverged = 4,
  kVersionMismatch = 5,
  kUnknownAttribute = 6,
};

/// Runs one command line (without the program name) and returns the exit
/// code. Regular output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wearembed::cli

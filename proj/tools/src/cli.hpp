// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vtune::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitVerified = 0;
inline constexpr int kExitNotVerified = 1;
inline constexpr int kExitError = 2;

/// Runs the tool. `args` excludes the program name. Human-readable output
/// goes to `out`; diagnostics and logs go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vtune::cli

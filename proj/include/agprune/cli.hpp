// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace agprune {

// Process exit codes. The first four mirror the stop reason of a run.
inline constexpr int kExitTargetReached = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitAgentFailure = 3;
inline constexpr int kExitIoError = 4;
inline constexpr int kExitAgentStop = 5;
inline constexpr int kExitMaxIterations = 6;

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace agprune

// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace petcond {

/// Entry point of the `petcond` command line (simulate | train | denoise | evaluate |
/// report). `args` excludes the program name. Returns the process exit code:
/// 0 success, 2 config error, 3 constraint violation, 4 I/O error, 5 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace petcond

#pragma once

#include <string>
#include <vector>

namespace mvrad {

/// Parses `args` (without the program name), dispatches the subcommand and
/// returns the process exit code: 0 success, 2 configuration errors, 3 data
/// errors, 4 numeric failures, 1 anything else.
int run_cli(const std::vector<std::string>& args);

int run_cli(int argc, char** argv);

}  // namespace mvrad

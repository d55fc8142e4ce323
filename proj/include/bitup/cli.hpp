#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bitup {

/// Exit codes: 0 success, 1 user error (flags, parse), 2 pipeline failure.
enum ExitCode : int { exit_ok = 0, exit_user_error = 1, exit_pipeline_failure = 2 };

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bitup

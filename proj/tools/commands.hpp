#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hsu::cli {

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_usage = 2 };

/// Runs one `deepgun` invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace hsu::cli

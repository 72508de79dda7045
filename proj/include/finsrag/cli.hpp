#pragma once
// Subcommand dispatch for the finsrag tool, callable in-process so tests can
// drive whole pipelines without spawning child processes.

#include <string>
#include <vector>

namespace finsrag {

// `args` is argv without the program name. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage error, 3 config or manifest error.
int run_command(std::vector<std::string> args);

}  // namespace finsrag

#pragma once

#include <string>
#include <vector>

namespace flexsched {

// Entry point of the command-line tool; argv[0] is already stripped.
// Returns the process exit code (0 ok, 2 parse error, 3 infeasibility or
// broken invariant, 4 configuration error).
int run_cli(const std::vector<std::string>& args);

}  // namespace flexsched

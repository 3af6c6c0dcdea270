#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace combatkit {

// Runs one command line (program name excluded) and returns the exit code:
// 0 on success, 1 on a runtime failure (JSON error object on `err`), 2 on a
// usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace combatkit

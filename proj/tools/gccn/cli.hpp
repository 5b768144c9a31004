#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gccn::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

// Runs one command line (without the program name) and returns its exit code.
// Normal output goes to `out`; a failure prints one "error: <kind>: <reason>"
// line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gccn::cli

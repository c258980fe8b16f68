#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hubs::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kOverwrite = 3, kIncompatible = 4 };

// Runs one command line (without the program name). Normal output goes to
// `out`, progress and diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hubs::cli

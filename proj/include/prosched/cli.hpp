#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace prosched {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIo = 2, kExitConfig = 3 };

/// Runs one command line (without the program name). Reports go to files;
/// `out` receives a short summary and `err` diagnostics.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prosched

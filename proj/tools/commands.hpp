#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vulaste/error.hpp"

namespace vulaste::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

int exit_code_for(ErrorCode code);

// Runs the command line `args` (without the program name). Normal output goes
// to `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vulaste::cli

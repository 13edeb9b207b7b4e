#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

namespace rcrf::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitIo = 3;

/// Maps an exception to the documented exit code.
int exit_code(const std::exception& e);

/// Runs the command line (args excludes the program name) and returns the
/// exit code. Errors are reported on `err`, never thrown.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rcrf::cli

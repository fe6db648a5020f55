#pragma once

#include <string>
#include <vector>

namespace si3::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Parses the command line and runs one subcommand. Returns 0 on success, 1 on
// bad input (including malformed flags or config files), 2 on run-time
// failure such as training divergence. Diagnostics go to stderr.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace si3::cli

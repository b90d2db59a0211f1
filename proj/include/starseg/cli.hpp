#pragma once

#include <string>
#include <vector>

namespace starseg::cli {

/// Exit codes: 0 success, 1 data or processing error, 2 usage error.
int run(int argc, char** argv);

/// Same, with args[0] as the program name.
int run(const std::vector<std::string>& args);

/// Environment variable consulted for the default --threads value.
inline constexpr const char* kThreadsEnv = "STARSEG_THREADS";

}  // namespace starseg::cli

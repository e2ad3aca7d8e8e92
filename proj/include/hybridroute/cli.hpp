#pragma once

#include <string>
#include <vector>

namespace hybridroute::cli {

/// Exit codes: 0 success, 1 runtime error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

int run(int argc, const char* const* argv);
/// argv without the program name.
int run(const std::vector<std::string>& args);

}  // namespace hybridroute::cli

#pragma once

#include <iosfwd>

namespace atma {

// Exit codes of the atma command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;   // invalid config, script or unreadable session
inline constexpr int kExitRuntime = 3;  // failure while running
inline constexpr int kExitPortBusy = 4;

// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace atma

#pragma once

#include <ostream>

namespace sinsim::cli {

// Exit codes are a stable contract for scripts.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitRuntime = 4;

/// Parses argv and runs one subcommand. Results go to `out`; progress and
/// the one-line JSON error record go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sinsim::cli

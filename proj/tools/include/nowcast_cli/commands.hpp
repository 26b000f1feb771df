#pragma once

#include <iosfwd>

namespace nowcast::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 2;
inline constexpr int kExitConfig = 3;

/// Entry point of the `nowcast` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nowcast::cli

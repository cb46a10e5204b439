#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace evoroc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name. Normal output goes to `out`, diagnostics
// and usage text to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evoroc::cli

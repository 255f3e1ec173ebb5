#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace protector::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitError = 2; // parse, transform, link or I/O failure
inline constexpr int kExitTrap = 3;

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Maps `-ASLR`, `-canary` and `-canary_and_ASLR` to `--pass` values.
std::vector<std::string> rewrite_legacy_flags(const std::vector<std::string>& args);

} // namespace protector::cli

#pragma once

namespace blr {

inline constexpr const char *kVersion = "1.0.0";

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 1 verification failure, 2 bad input, 3 numerical failure.
int run_cli(int argc, const char *const *argv);

} // namespace blr

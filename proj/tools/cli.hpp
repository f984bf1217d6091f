#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stochsym::cli {

inline constexpr int kSuccess = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsage = 2;
inline constexpr int kInvalid = 3;

/// Runs one command line (without the program name). Reports go to out,
/// diagnostics to err; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stochsym::cli

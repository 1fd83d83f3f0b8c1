#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ecgdx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitSingleClass = 4;

// Parses `args` (without the program name) and runs one subcommand.
// Diagnostics go to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ecgdx::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace patchtriage::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDomain = 4;

/// Runs one `patchtriage` invocation. `args` excludes the program name.
/// Returns the process exit code; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace patchtriage::cli

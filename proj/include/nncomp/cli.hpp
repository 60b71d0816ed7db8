#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nncomp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name). Returns 0 on
/// success, 2 for usage errors and missing input files, 1 for any other
/// failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nncomp

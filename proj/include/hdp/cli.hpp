#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hdp::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kRuntime = 2;

// Runs one command line (args excludes the program name).
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace hdp::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cinexai::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kVersion = "0.1.0";

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int parse_and_dispatch(int argc, char** argv);

}  // namespace cinexai::cli

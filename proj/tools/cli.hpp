#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ipfnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitInputError = 3;

inline constexpr const char* kSchemaVersion = "1";

/// Runs the `ipfnet` command line. args excludes the program name. JSON and
/// CSV results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ipfnet::cli

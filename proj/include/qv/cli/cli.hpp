#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qv::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Parses argv, runs the subcommand and maps failures to exit codes:
/// 0 success, 1 I/O or cache failure, 2 bad input/config/usage, 3 numeric
/// failure. Results go to files; `out` only receives help, version and short
/// summaries, diagnostics go to `err` and the log.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qv::cli

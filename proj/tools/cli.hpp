#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bbtraj::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,       // anything not covered below
  kConfigError = 2,   // bad flags, config values or unusable input data
  kIoError = 3,       // unreadable/unwritable files, malformed CSV or weight files
  kNumericError = 4,  // training diverged
};

/// Runs one subcommand. `args` excludes the program name. Human-readable
/// results go to `out`, progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bbtraj::cli

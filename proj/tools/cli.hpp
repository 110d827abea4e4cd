#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mvface::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kIo = 3,
  kNumeric = 4,
  kProtocol = 5,
  kInvalidInput = 6,  // parameter or dimension errors
};

/// Runs one subcommand. args excludes the program name. Results go to out,
/// progress and diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mvface::cli

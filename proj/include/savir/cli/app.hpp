#pragma once

#include <ostream>

namespace savir::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kBadConfig = 2,
  kNotFound = 3,
  kBadFormat = 4,
  kDiverged = 5,
  kGenerationFailed = 6,
  kValidationFailed = 7,
  kInternal = 8,
};

/// Entry point of the command-line tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace savir::cli

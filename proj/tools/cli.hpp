#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sptucker::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kParse = 3,
  kIo = 4,
  kNumerical = 5,
};

/// Runs the command line `args` (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sptucker::cli

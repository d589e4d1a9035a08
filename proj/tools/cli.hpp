#pragma once

namespace salve::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumerical = 3,
};

// Parses argv, runs one subcommand and maps failures to exit codes.
int run(int argc, char** argv);

}  // namespace salve::cli

#ifndef VECCHIA_TOOLS_CLI_HPP
#define VECCHIA_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace vecchia::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsageOrParseError = 2,
  kInfeasible = 3,
};

/// Runs one command line. Output that is not redirected to a file by
/// --output goes to `out`; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vecchia::cli

#endif  // VECCHIA_TOOLS_CLI_HPP

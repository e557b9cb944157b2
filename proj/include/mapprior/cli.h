#ifndef MAPPRIOR_CLI_H_
#define MAPPRIOR_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace mapprior {

enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 1,
  kExitConfigError = 2,
  kExitNumericalError = 3,
};

// Runs the command line `args` (args[0] is the program name) and returns the
// process exit code. Normal output goes to `out`, diagnostics to `err`.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace mapprior

#endif  // MAPPRIOR_CLI_H_

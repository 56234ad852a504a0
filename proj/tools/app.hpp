#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lsc::app {

enum ExitCode : int {
  kOk = 0,
  kError = 1,
  kRankFailed = 2,
};

/// Runs one `lsc` invocation. `args` excludes the program name.
///
/// Every subcommand accepts `--config FILE` with `key=value` lines; keys are
/// option names without the leading dashes (underscores are accepted for
/// dashes). Values from the file apply first, so explicit flags win.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lsc::app

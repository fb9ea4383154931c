#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dirlink {

/// Exit codes: 0 success, 1 usage, 2 data error, 3 run failure.
enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitRun = 3 };

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dirlink

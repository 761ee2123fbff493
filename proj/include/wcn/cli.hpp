#pragma once

#include <iosfwd>

namespace wcn {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitValidation = 2, kExitRuntime = 3 };

/// Entry point of the `wcn` tool; `out`/`err` receive stdout/stderr text.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wcn

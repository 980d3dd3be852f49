#pragma once

#include <iosfwd>

namespace hypermatch::cli {

/// Parses the command line and runs one subcommand. Returns the process exit
/// code: 0 success, 1 runtime failure, 2 usage error. Results go to `out`,
/// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Sets the log level from HYPERMATCH_LOG (trace, debug, info, warn, error,
/// critical, off). Unset means info.
void configure_logging();

}  // namespace hypermatch::cli

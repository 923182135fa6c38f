#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chainstack::cli {

/// Runs one `chainstack` invocation. `args` excludes the program name.
/// Results go to `out`; failures are written to `err` as a JSON error record.
/// Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chainstack::cli

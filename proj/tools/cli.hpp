#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ccid::cli {

/// Runs `ccid <args...>` in-process. Returns the exit status; diagnostics go
/// to `err` as a single line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ccid::cli

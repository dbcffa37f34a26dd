#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stgcn::cli {

// Entry point of the `stgcn` tool. Primary outputs go to `out`, the resolved
// config echo and diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stgcn::cli

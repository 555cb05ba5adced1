#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace finmeta::cli {

/// Runs one `finmeta` invocation. `args` excludes the program name.
/// Returns the process exit status: 0 on success, 1 on runtime failure,
/// 2 on usage errors.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace finmeta::cli

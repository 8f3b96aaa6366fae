#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cbma {

/// Runs the command-line front end. `args` excludes the program name.
/// Written artifact paths go to `out`; warnings, progress and the single-line
/// error record go to `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cbma

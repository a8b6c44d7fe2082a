#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scenepool {

/// Runs the command line tool. `args` excludes the program name. Results go
/// to `out`; diagnostics and warnings go to `err`. Returns the exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scenepool

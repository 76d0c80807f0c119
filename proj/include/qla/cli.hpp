#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qla {

// Runs the command line given argv-style arguments (without the program
// name). Data rows go to `out`, diagnostics to `err`. Returns the process
// exit code: 0 success, 2 configuration error, 3 numeric error.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace qla

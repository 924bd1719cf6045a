#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace encaudit::cli {

// Dispatches one subcommand. Exit codes: 0 success, 1 domain error
// (mode failure, missing token, bad data), 2 usage error.
int run_command(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace encaudit::cli

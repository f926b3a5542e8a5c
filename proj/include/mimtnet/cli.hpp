#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mimtnet {

/// Entry point of the `mimtnet` command line tool. args excludes the program
/// name. Returns the process exit code: 0 success, 2 parameter error,
/// 3 data/format error, 4 training error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mimtnet

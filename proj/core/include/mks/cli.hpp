#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mks {

/// Exit codes of the command line tool.
enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2 };

/// Entry point of the `mks` tool:
///   mks <scf|sweep|response|audit|audit-xc|quasi-opt> --config PATH
///       [--cutoffs LIST] [--reference EC] [--betas LIST] [--json] [--out DIR]
/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mks

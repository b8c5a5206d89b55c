#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace editfit {

/// Entry point of the `editfit` tool. Returns 0 on success, 1 on validation or
/// runtime failures, 2 on usage errors (unknown subcommand or flag).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace editfit

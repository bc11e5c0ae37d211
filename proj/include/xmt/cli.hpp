#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xmt {

/// Exit codes: 0 success, 1 runtime failure ("error: ..." on one line),
/// 2 usage error or unknown command.
int dispatch(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xmt

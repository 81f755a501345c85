#pragma once

#include <iosfwd>

namespace retrocap {

// Runs the command-line tool. Data goes to `out`, diagnostics to `err`.
// Exit codes: 0 success, 1 usage or config error, 2 data/format error,
// 3 numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace retrocap

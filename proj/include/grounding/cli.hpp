#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace grounding {

/// Full command-line driver (subcommands: parse, ground, bench,
/// render-density). Runs in-process so tests can capture streams exactly.
/// Returns the process exit code: 0 success, 1 runtime/validation failure,
/// 2 usage or parse errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace grounding

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dgcf::cli {

enum ExitCode : int { kSuccess = 0, kUserError = 1, kInternalError = 2 };

/// Entry point shared by the dgcf binary and the tests. args excludes the
/// program name. Machine-readable output goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Grid spec for diagnose: "L" or "a..b" (depth b, layers 0..b reported).
long long parse_depth_spec(const std::string& spec);

}  // namespace dgcf::cli

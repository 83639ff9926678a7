#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fewshot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (args[0] is the program name). Regular output goes
/// to `out`; failures are reported on `err` as a single JSON line
/// {"error": {"code": ..., "message": ...}}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fewshot::cli

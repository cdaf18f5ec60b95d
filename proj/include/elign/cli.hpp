#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace elign::cli {

enum ExitCode : int { kSuccess = 0, kUserError = 1, kInternalError = 2 };

// Default root for run directories when --output is not given.
inline constexpr const char* kOutputRootEnv = "ELIGN_OUTPUT_ROOT";

// args excludes the program name. Errors go to `err` as a single JSON line
// ({"error": ..., "kind": "user"|"internal"}), usage text after it.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace elign::cli

#pragma once

#include <iosfwd>

namespace actionkit {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitExternal = 3;

/// Runs the command line in-process. Payload goes to `out`; logs and the
/// structured {"code", "message"} error object go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace actionkit

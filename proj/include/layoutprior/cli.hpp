#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace layoutprior {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

// Runs one CLI invocation (args exclude the program name). Normal output goes to `out`; failures
// print a single line `error code=<n> kind=<usage|data|numerical>: <message>` to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Shortest round-trip decimal text, always containing a '.' or exponent ("0" -> "0.0").
[[nodiscard]] std::string format_number(double v);

}  // namespace layoutprior

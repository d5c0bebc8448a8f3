#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace newton_iks {

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumerical = 2 };

/// Parses a flat `key = value` file. Blank lines and lines starting with
/// '#' are ignored. Throws std::invalid_argument on malformed lines or
/// repeated keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Entry point of the `newton_iks_cli` tool. Subcommands: simulate, smooth,
/// bench, check-derivatives. Output files given as "-" go to `out`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload over a vector of arguments (argv[0] included).
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace newton_iks

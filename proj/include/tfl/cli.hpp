#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tfl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericFailure = 3 };

/// Runs one subcommand. args excludes the program name, e.g.
/// {"train", "--data", "s.csv", "--out", "m.tfl"}.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// Reads a key=value config file ('#' starts a comment) into --key=value
/// arguments. Quotes around values are stripped.
std::vector<std::string> config_file_args(const std::filesystem::path &path);

} // namespace tfl::cli

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace priornet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs one subcommand; args excludes the program name. Returns the exit
// code: 0 on success, 2 for usage errors, 1 for anything that failed while
// running. Failures print a single "error: ..." line to err.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// <root>/<YYYYmmdd-HHMMSS>-<command>, with a numeric suffix when taken.
std::filesystem::path make_run_directory(const std::filesystem::path& root, const std::string& command);

}  // namespace priornet

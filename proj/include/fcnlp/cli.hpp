#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>

namespace fcnlp {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;  // bad flags, config values or subcommand
inline constexpr int kExitRuntime = 2;     // I/O, malformed input files, training failures

// Runs one subcommand. args excludes the program name. Results go to `out`,
// diagnostics to `err`.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace fcnlp

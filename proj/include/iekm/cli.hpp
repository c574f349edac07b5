#pragma once

// The iekm command line, callable in-process.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace iekm {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,     // bad data, I/O, numerical failure
  kExitUsage = 2,       // bad flags
  kExitAcceptance = 3,  // gradcheck or probe below its bar
};

// Runs one command line (args[0] is the program name) and returns its exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace iekm

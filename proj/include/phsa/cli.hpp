#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace phsa::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kVerifyFailed = 3 };

/// Environment variable naming the directory that relative paths are
/// resolved against.
inline constexpr const char* kOutputRootEnv = "PHSA_OUTPUT_ROOT";

std::filesystem::path resolve(const std::string& path);

/// Runs the `phsa` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phsa::cli

#pragma once

#include "propd/transforms.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace propd {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitDataMismatch = 3,
  kExitRuntime = 4,
};

/// Runs the command-line front end. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "tx,ty,tz" (translational only) or "tx,ty,tz,qw,qx,qy,qz". Throws ParseError.
Configuration parse_pose(const std::string& text, Mode mode);

/// One configuration per line as 7 comma-separated numbers (3 are accepted in
/// translational mode). Blank lines, '#' comments and a non-numeric header
/// line are skipped. Throws ParseError.
std::vector<Configuration> read_queries(const std::filesystem::path& path, Mode mode);

}  // namespace propd

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace desnow::cli {

enum ExitCode : int {
  kOk = 0,
  kBadInvocation = 2,
  kBadData = 3,
  kInternal = 4,
};

/// Entry point of the `desnow` tool. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace desnow::cli

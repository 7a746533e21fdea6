#pragma once

#include <string>
#include <vector>

namespace semprobe::cli {

// Runs one subcommand. Exit codes: 0 success, 1 usage or validation error,
// 2 I/O or format error. args excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace semprobe::cli

#pragma once

// Command-line front end. run() is callable in process so tests can drive
// whole pipelines and check exit codes without spawning binaries.
//
// Exit codes: 0 success, 2 for configuration/data/metric problems, 1 for
// anything else unexpected.

#include <string>
#include <vector>

namespace tend::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// args holds the command line without the program name, in natural order.
int run(const std::vector<std::string>& args);

}  // namespace tend::cli

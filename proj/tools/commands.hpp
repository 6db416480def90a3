#pragma once

#include <string>
#include <vector>

namespace ceegcn::cli {

/// Runs the command line `args` (args[0] is the program name). Returns the
/// process exit code; failures print a one-line diagnostic to stderr.
int run(const std::vector<std::string>& args);

}  // namespace ceegcn::cli

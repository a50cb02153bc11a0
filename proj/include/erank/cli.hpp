#pragma once

#include <string>
#include <vector>

namespace erank {

// Command-line front end: generate | train | eval | sweep | compare.
// Returns the process exit status: 0 success, 1 component failure,
// 2 usage error.
int run_command(const std::vector<std::string>& args);
int run_command(int argc, char** argv);

}  // namespace erank

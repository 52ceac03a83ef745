#pragma once

#include <string>
#include <vector>

namespace ipvs {

// Command-line entry point. Returns 0 on success, 1 on a domain error and 2
// on a usage error.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace ipvs

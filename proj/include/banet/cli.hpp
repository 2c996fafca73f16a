#pragma once

#include <string>
#include <vector>

namespace banet::cli {

// Full command-line front end. Returns the process exit code:
// 0 success, 1 usage error, 2 data error, 3 numeric failure.
int run_cli(int argc, const char* const* argv);

// Same, argv[0] supplied internally. Convenience for in-process tests.
int run_cli(const std::vector<std::string>& args);

} // namespace banet::cli

#pragma once

#include <string>
#include <vector>

namespace condet {

// Exit codes: 0 success, 2 usage, 3 data validation / I/O, 4 numerical failure.
int run_cli(int argc, char** argv);

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace condet

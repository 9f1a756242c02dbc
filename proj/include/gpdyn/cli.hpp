#pragma once

// Command-line front end: generate, train, rollout, eval.
// Exit codes: 0 success, 2 usage or configuration error, 3 numerical abort.

#include <string>
#include <vector>

namespace gpdyn {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

int run_cli(int argc, const char* const* argv);

/// Same, with the arguments after the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace gpdyn

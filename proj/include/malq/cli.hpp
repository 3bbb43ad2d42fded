#pragma once

#include <string>
#include <vector>

namespace malq {

// Runs one subcommand from argv tokens (program name excluded).
// Exit codes: 0 success, 1 usage error, 2 validation or runtime error.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace malq

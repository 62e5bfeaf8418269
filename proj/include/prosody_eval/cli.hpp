#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace prosody_eval {

/// Entry point of the `prosody_eval` tool. Returns the process exit code;
/// normal output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Stops a running `serve` command. Returns false when no server is active.
bool request_server_stop();

}  // namespace prosody_eval

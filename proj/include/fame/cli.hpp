#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fame {

// Runs the fame tool; diagnostics go to `err` as one JSON object with a
// stable {kind, message} schema. Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fame

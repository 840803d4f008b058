#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace forcecast::cli {

/// Runs one subcommand. Returns 0 on success, 1 for configuration errors,
/// 2 for data errors and 3 when training diverges.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace forcecast::cli

#pragma once

#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "anaforge/llm.hpp"

namespace anaforge {

struct CliEnvironment {
  /// HTTP transport for live and record modes; null means HTTPS.
  std::shared_ptr<HttpTransport> transport;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

/// Command-line entry point (`args[0]` is the program name). Subcommands:
/// design, bench, size, library. Returns 0 on success (design: verdict pass),
/// 1 when a design fails, 2 on usage or runtime errors.
int run_cli(const std::vector<std::string>& args, const CliEnvironment& env = {});

}  // namespace anaforge

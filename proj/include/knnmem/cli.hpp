#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace knnmem {

/// Entry point of the `knnmem` command line tool. `args` excludes the
/// program name. Returns the process exit code; diagnostics go to `err`.
///
/// Subcommands: ingest, classify, erase, protocol, serve, stats.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace knnmem

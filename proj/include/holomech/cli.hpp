#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace holomech::cli {

// holomech <command> --scenario <file|template> [options]
// Commands: run, transport, factor-check, blocks, sweep, convergence, check.
// Writes JSON-lines records to --out (default: `out`) and diagnostics to
// `err`. Returns 0 on success, 1 on numerical failure, 2 on input errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace holomech::cli

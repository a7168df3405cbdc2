#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dotcav::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Runs one subcommand. Results go to files plus a human-readable summary on
// `out`; structured error messages go to `err`. Returns 0 on success, 1 on
// validation errors (bad flags, missing config, schema mismatch), 2 on
// non-convergence or numerical failure. Every file-producing run writes a
// manifest (<output>.manifest.json) sufficient to reproduce it via `rerun`.
int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

} // namespace dotcav::cli

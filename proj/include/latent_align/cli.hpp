#pragma once

// `align` command-line front end. Exit codes: 0 success, 2 I/O or file format
// problems, 3 invalid arguments, shapes or splits, 4 numerical failures. On
// failure a single JSON line {"error", "family", "exit_code", "message"} is
// written to the error stream.

#include <ostream>
#include <string>
#include <vector>

namespace latent_align::cli {

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace latent_align::cli

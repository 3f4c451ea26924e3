#pragma once

#include <iosfwd>

namespace cdrc::cli {

enum ExitCode : int { ok = 0, internal_error = 1, undefined_cells = 2, argument_error = 3 };

/// Entry point of the `cdrc` executable; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdrc::cli

#pragma once

#include <iosfwd>

namespace liftgan::cli {

// Parses the command line and runs one subcommand. Normal output goes to
// `out`, progress and errors to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace liftgan::cli

#pragma once

#include <iosfwd>

namespace stabilens {

/// Entry point of the stabilens command line. argv[0] is the program name.
/// Returns 0 on success, 2 on usage errors and 1 on pipeline errors; every
/// failure prints a single diagnostic line to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stabilens

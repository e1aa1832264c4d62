#pragma once

#include <iosfwd>

namespace wush {

// Subcommands gen, plan, loss, sweep, validate {fp,int}, bounds, grids.
// Returns 0 on success, 1 on invalid input or usage, 2 on numerical failure
// (including a validate or bounds check that does not hold).
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace wush

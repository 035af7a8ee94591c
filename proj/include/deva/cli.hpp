#pragma once

namespace deva {

// Parses argv and runs one subcommand. Returns 0 on success, 1 on usage
// errors, 2 on data errors.
int run_cli(int argc, const char* const* argv);

}  // namespace deva

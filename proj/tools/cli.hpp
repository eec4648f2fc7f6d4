#pragma once

#include <iosfwd>

namespace cdlgen {

// Exit codes: 0 success, 1 failure, 2 empty index, 64 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdlgen

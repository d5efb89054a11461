#pragma once

#include <iosfwd>

namespace layerkit {

/// Entry point of the `layerkit` command. Returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure. Failures print
/// one line `error: <code>: <message>` to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace layerkit

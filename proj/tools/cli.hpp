#pragma once

namespace handsplat {

// Entry point shared by the binary and the CLI tests.
// Exit codes: 0 success, 1 validation failure, 2 usage or I/O error.
int run_cli(int argc, const char* const* argv);

}  // namespace handsplat

#pragma once

namespace ddss {

// full command-line front end; returns the process exit code
// (0 ok, 2 config/usage, 3 fingerprint mismatch, 4 I/O, 1 other)
int run_cli(int argc, char** argv);

}  // namespace ddss

#pragma once

namespace kunet {

/// Full command-line entry point (generate | run | analyze).
/// Exit codes: 0 success, 2 usage error, 3 runtime/numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace kunet

#pragma once

namespace esrr {

// Command-line entry point (validate-kernels | certify | solve | sweep).
// Returns the process exit code:
//   0 success / all checks pass
//   1 config parse or validation error
//   2 kernel derivative validation failed
//   3 certificate infeasible (source condition fails)
//   4 non-degeneracy verdict fail
//   5 solve hit the iteration cap without converging
//   6 a sweep cell's solver failed
//   7 sweep completed but some cells failed recovery
int run_cli(int argc, const char* const* argv);

}  // namespace esrr

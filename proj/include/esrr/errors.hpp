#pragma once

#include <stdexcept>
#include <string>

namespace esrr {

enum class ErrorCode {
  FAILS_VALIDATION,
  FAMILY_MISMATCH,
  TOO_MANY_ATOMS,
  NO_CONVERGENCE,
  MAX_ITERS,
  INFEASIBLE,
  GRID_INSUFFICIENT,
  SOLVER_FAILED,
  DEGENERATE_DIRECTIONS,
  BAD_CONFIG,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::FAILS_VALIDATION: return "FAILS_VALIDATION";
    case ErrorCode::FAMILY_MISMATCH: return "FAMILY_MISMATCH";
    case ErrorCode::TOO_MANY_ATOMS: return "TOO_MANY_ATOMS";
    case ErrorCode::NO_CONVERGENCE: return "NO_CONVERGENCE";
    case ErrorCode::MAX_ITERS: return "MAX_ITERS";
    case ErrorCode::INFEASIBLE: return "INFEASIBLE";
    case ErrorCode::GRID_INSUFFICIENT: return "GRID_INSUFFICIENT";
    case ErrorCode::SOLVER_FAILED: return "SOLVER_FAILED";
    case ErrorCode::DEGENERATE_DIRECTIONS: return "DEGENERATE_DIRECTIONS";
    case ErrorCode::BAD_CONFIG: return "BAD_CONFIG";
  }
  return "UNKNOWN";
}

struct Error : std::runtime_error {
  ErrorCode code;
  Error(ErrorCode c, const std::string& what)
      : std::runtime_error(std::string(to_string(c)) + ": " + what), code(c) {}
};

}  // namespace esrr

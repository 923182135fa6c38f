#include "chainstack/error.hpp"

#include <utility>

namespace chainstack {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::io: return "IO";
    case ErrorCode::parse: return "Parse";
    case ErrorCode::too_few_draws: return "TooFewDraws";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::contract: return "Contract";
    case ErrorCode::domain: return "Domain";
    case ErrorCode::numerical_failure: return "NumericalFailure";
    case ErrorCode::convergence: return "Convergence";
    case ErrorCode::bound_violation: return "BoundViolation";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::io:
    case ErrorCode::parse:
      return 2;
    case ErrorCode::too_few_draws:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::contract:
    case ErrorCode::domain:
    case ErrorCode::bound_violation:
      return 3;
    case ErrorCode::numerical_failure:
      return 4;
    case ErrorCode::convergence:
      return 5;
  }
  return 1;
}

Error::Error(ErrorCode code, std::string module, std::string message)
    : std::runtime_error(std::move(message)), code_(code), module_(std::move(module)) {}

Error& Error::at(std::string where) {
  where_ = std::move(where);
  return *this;
}

}  // namespace chainstack

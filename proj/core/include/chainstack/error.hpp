#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chainstack {

/// Failure categories shared by every module. The CLI maps these onto exit codes.
enum class ErrorCode {
  io,
  parse,
  too_few_draws,
  dimension_mismatch,
  contract,
  domain,
  numerical_failure,
  convergence,
  bound_violation,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Process exit code for a failure of the given category:
/// 2 IO/parse, 3 dimension/contract, 4 numerical, 5 non-convergence.
int exit_code_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, std::string message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

  /// Offending location when one exists (file path, "(row, col)", "(i, k)", cluster index).
  const std::optional<std::string>& where() const noexcept { return where_; }
  Error& at(std::string where);

 private:
  ErrorCode code_;
  std::string module_;
  std::optional<std::string> where_;
};

}  // namespace chainstack

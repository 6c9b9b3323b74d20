#pragma once

#include <stdexcept>
#include <string>

namespace kcm {

// Error classes. The CLI maps each to a distinct exit code.
enum class ErrorCode {
  invalid_topology,
  missing_parameter,
  invalid_parameter,
  non_finite_angle,
  axis_normalization,
  conformation_dimension,
  force_dimension,
  non_finite_force,
  coincident_atoms,
  invalid_schedule,
  invalid_solver_config,
  config_parse,
  config_validation,
  config_mismatch,
  io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kcm

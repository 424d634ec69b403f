#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qlink {

enum class ErrorCode {
  out_of_domain,
  no_crossing,
  fit_diverged,
  degenerate_histogram,
  division_degenerate,
  domain_error,
  invalid_scenario,
  config_invalid,
  io_error,
  format_error,
  empty_input,
  invalid_range,
  no_frames,
  too_few_frames,
};

// Broad failure class; the CLI maps these onto its exit codes.
enum class ErrorCategory { validation = 2, io = 3, analysis = 4 };

std::string_view reason_name(ErrorCode code) noexcept;
ErrorCategory category_of(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view reason() const noexcept { return reason_name(code_); }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace qlink

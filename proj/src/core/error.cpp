#include "qlink/error.hpp"

namespace qlink {

std::string_view reason_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::out_of_domain: return "OutOfDomain";
    case ErrorCode::no_crossing: return "NoCrossing";
    case ErrorCode::fit_diverged: return "FitDiverged";
    case ErrorCode::degenerate_histogram: return "DegenerateHistogram";
    case ErrorCode::division_degenerate: return "DivisionDegenerate";
    case ErrorCode::domain_error: return "DomainError";
    case ErrorCode::invalid_scenario: return "InvalidScenario";
    case ErrorCode::config_invalid: return "ConfigInvalid";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::format_error: return "FormatError";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::invalid_range: return "InvalidRange";
    case ErrorCode::no_frames: return "NoFrames";
    case ErrorCode::too_few_frames: return "TooFewFrames";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::config_invalid:
    case ErrorCode::invalid_scenario:
    case ErrorCode::domain_error:
    case ErrorCode::invalid_range:
      return ErrorCategory::validation;
    case ErrorCode::io_error:
    case ErrorCode::format_error:
      return ErrorCategory::io;
    default:
      return ErrorCategory::analysis;
  }
}

}  // namespace qlink

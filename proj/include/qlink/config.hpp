#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include "qlink/analysis.hpp"
#include "qlink/timetag_sim.hpp"

namespace qlink {

/// One JSON run description. Missing keys take their defaults; unknown
/// keys and wrong types are rejected with the JSON pointer of the field.
struct RunConfig {
  std::string pass_id = "pass";
  PassModel pass;
  PulseSchedule schedule;
  BudgetParams budget;
  FadingModel fading;
  double fading_correlation_time_s = 0.2;
  DetectorResponse detector;
  double source_pulse_fwhm_ps = 55.0;
  double satellite_spread_fwhm_ps = 0.0;
  double tdc_resolution_ps = 1.0;
  double mu_sat = 16.0;
  double dark_rate_hz = 400.0;
  double sky_rate_hz = 0.0;
  bool sky_scaled_by_efficiency = false;
  std::uint64_t seed = 1;
  AnalysisSettings analysis;

  /// Top-level sections present in the source document.
  unsigned sections = 0;
  /// Document with every default filled in.
  std::string normalized_json;
  /// FNV-1a 64 of the normalized document without the seed, as 16 hex
  /// digits; streams simulated with another seed still match it.
  std::string digest;

  enum Section : unsigned {
    kPass = 1u << 0,
    kSchedule = 1u << 1,
    kBudget = 1u << 2,
    kFading = 1u << 3,
    kDetector = 1u << 4,
    kSim = 1u << 5,
    kAnalysis = 1u << 6,
  };

  bool has(Section s) const { return (sections & s) != 0; }
  /// Throws ConfigInvalid naming the first missing section.
  void require(std::initializer_list<Section> needed) const;

  SimConfig sim_config() const;
};

/// Relative profile paths resolve against base_dir.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace qlink

#pragma once

#include <cstdint>
#include <string>

#include "qlink/arrivals.hpp"
#include "qlink/detector_response.hpp"
#include "qlink/link_budget.hpp"
#include "qlink/pass_model.hpp"
#include "qlink/timetag.hpp"

namespace qlink {

struct SimConfig {
  PassModel pass;
  PulseSchedule schedule;
  BudgetParams budget;
  FadingModel fading;
  /// Length of the piecewise-constant fading windows, keyed on emission time.
  double fading_correlation_time_s = 0.2;
  /// Simulation truth; sampled offsets are taken relative to t0.
  DetectorResponse detector;
  double satellite_spread_fwhm_ps = 0.0;
  double source_pulse_fwhm_ps = 55.0;
  double mu_sat = 16.0;  // photons per pulse leaving the satellite
  double dark_rate_hz = 400.0;
  double sky_rate_hz = 0.0;
  bool sky_scaled_by_efficiency = false;  // multiply sky rate by eta_rx * eta_det
  double tdc_resolution_ps = 1.0;
  std::uint64_t seed = 1;

  std::string pass_id;
  std::string config_digest;

  void validate() const;
  double background_rate_hz() const;
};

/// Synthetic time-tag stream for one pass. Deterministic in the config:
/// every slot draws from its own substream of `seed` and every fading
/// window from its own, so the result does not depend on thread count.
TimeTagStream simulate(const SimConfig& cfg);

/// Fading multiplier of window `index` (shared by all slots it overlaps).
double fading_factor(const SimConfig& cfg, std::int64_t index);

}  // namespace qlink

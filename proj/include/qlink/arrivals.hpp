#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qlink/pass_model.hpp"

namespace qlink {

struct TimeWindow {
  double start_s;
  double end_s;
  double length() const { return end_s - start_s; }
};

/// Shutter-gated pulse train: each slot transmits during tx and listens
/// during rx. Times are relative to the slot start.
struct PulseSchedule {
  double rep_rate_hz = 1e8;
  double slot_length_s = 0.100;
  TimeWindow tx{0.0, 0.040};
  TimeWindow rx{0.050, 0.090};
  double pass_duration_s = 100.0;

  void validate() const;
  double period_ps() const { return 1e12 / rep_rate_hz; }
  std::int64_t slot_count() const;
};

/// Half-open range of global pulse indices.
struct PulseRange {
  std::int64_t first = 0;
  std::int64_t last = 0;
  std::int64_t size() const { return last > first ? last - first : 0; }
  bool empty() const { return last <= first; }
};

struct ExpectedArrival {
  std::int64_t pulse_index;
  std::int64_t t_ref_ps;  // rounded half-to-even
  double frac_ps;         // exact arrival minus t_ref_ps
};

/// Expected return times for every transmitted pulse of a pass.
///
/// Pulse i is emitted at i / rep_rate seconds from pass start. Within a
/// slot the round-trip time is evaluated exactly on a 1 ms grid of emission
/// epochs and joined by cubic Hermite segments using the analytic light-time
/// derivative; the interpolation error is far below a femtosecond for any
/// pass with |v_r| < 10 km/s, so per-pulse evaluation is a polynomial.
class ArrivalTimeline {
 public:
  ArrivalTimeline(PassModel pass, PulseSchedule schedule);

  const PassModel& pass() const { return pass_; }
  const PulseSchedule& schedule() const { return schedule_; }
  std::int64_t slot_count() const { return slot_count_; }

  /// Pulses emitted inside the tx window of `slot` (and before pass end).
  PulseRange tx_pulses(std::int64_t slot) const;
  long double emission_ps(std::int64_t pulse) const;

  /// Interpolated round-trip state for one slot.
  class Slot {
   public:
    PulseRange pulses() const { return pulses_; }
    double rtt_ps(std::int64_t pulse) const;
    long double arrival_ps(std::int64_t pulse) const;
    /// Round-trip times of consecutive pulses starting at `first`.
    void fill_rtt_ps(std::int64_t first, std::span<double> out) const;
    /// First pulse whose arrival is >= t_ps (pulses().last if none).
    std::int64_t first_arriving_at_or_after(long double t_ps) const;
    /// Pulse in this slot whose arrival is nearest to t_ps, ties toward
    /// the earlier pulse. Requires a nonempty slot.
    std::int64_t nearest(long double t_ps) const;

   private:
    friend class ArrivalTimeline;
    double rtt_local(double u_ps) const;

    const ArrivalTimeline* owner_ = nullptr;
    PulseRange pulses_;
    long double origin_ps_ = 0;  // emission time of knot 0
    double knot_step_ps_ = 0;
    std::vector<double> rtt_knots_ps_;
    std::vector<double> slope_knots_;  // d rtt / d t_emit, dimensionless
  };

  Slot slot(std::int64_t k) const;

  /// Pulses of `slot` whose expected arrival falls inside any rx window.
  std::vector<PulseRange> pulses_in_rx(std::int64_t slot) const;

  /// Slot whose rx window contains t_ps, or -1.
  std::int64_t rx_slot_of(long double t_ps) const;

 private:
  PassModel pass_;
  PulseSchedule schedule_;
  std::int64_t slot_count_;
  long double period_ps_;
};

/// All expected arrivals of one slot, sorted.
std::vector<ExpectedArrival> expected_arrivals(const ArrivalTimeline& timeline, std::int64_t slot);

/// Expected arrivals for the whole pass. Allocates 24 bytes per pulse;
/// prefer the per-slot overload for long passes.
std::vector<ExpectedArrival> expected_arrivals(const PassModel& pass, const PulseSchedule& schedule);

}  // namespace qlink

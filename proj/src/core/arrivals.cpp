#include "qlink/arrivals.hpp"

#include <algorithm>
#include <cmath>

#include "qlink/constants.hpp"
#include "qlink/error.hpp"

namespace qlink {
namespace {

constexpr double kKnotSpacingPs = 1e9;  // 1 ms of emission time

// Smallest pulse index whose emission epoch is >= t_s.
std::int64_t first_pulse_at(long double t_s, long double rep_rate) {
  const long double x = t_s * rep_rate;
  const long double r = std::nearbyint(x);
  if (std::fabs(x - r) < 1e-6L) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(x));
}

}  // namespace

void PulseSchedule::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::config_invalid, what); };
  if (!(rep_rate_hz > 0.0) || !std::isfinite(rep_rate_hz)) fail("schedule: rep_rate must be positive");
  if (!(slot_length_s > 0.0)) fail("schedule: slot_length must be positive");
  if (!(pass_duration_s > 0.0)) fail("schedule: pass_duration must be positive");
  for (const TimeWindow* w : {&tx, &rx}) {
    if (!(w->start_s >= 0.0 && w->end_s > w->start_s && w->end_s <= slot_length_s))
      fail("schedule: tx/rx windows must be nonempty and inside the slot");
  }
  if (tx.start_s < rx.end_s && rx.start_s < tx.end_s) fail("schedule: tx and rx windows overlap");
}

std::int64_t PulseSchedule::slot_count() const {
  return static_cast<std::int64_t>(std::ceil(pass_duration_s / slot_length_s - 1e-9));
}

ArrivalTimeline::ArrivalTimeline(PassModel pass, PulseSchedule schedule)
    : pass_(std::move(pass)), schedule_(schedule) {
  schedule_.validate();
  slot_count_ = schedule_.slot_count();
  period_ps_ = 1e12L / static_cast<long double>(schedule_.rep_rate_hz);
}

PulseRange ArrivalTimeline::tx_pulses(std::int64_t slot) const {
  const long double rep = schedule_.rep_rate_hz;
  const long double slot_start = static_cast<long double>(slot) * schedule_.slot_length_s;
  PulseRange r;
  r.first = first_pulse_at(slot_start + schedule_.tx.start_s, rep);
  r.last = first_pulse_at(slot_start + schedule_.tx.end_s, rep);
  r.last = std::min(r.last, first_pulse_at(schedule_.pass_duration_s, rep));
  if (r.last < r.first) r.last = r.first;
  return r;
}

long double ArrivalTimeline::emission_ps(std::int64_t pulse) const {
  return static_cast<long double>(pulse) * period_ps_;
}

ArrivalTimeline::Slot ArrivalTimeline::slot(std::int64_t k) const {
  Slot s;
  s.owner_ = this;
  s.pulses_ = tx_pulses(k);
  if (s.pulses_.empty()) return s;

  s.origin_ps_ = emission_ps(s.pulses_.first);
  const double span_ps = static_cast<double>(s.pulses_.size() - 1) * static_cast<double>(period_ps_);
  const auto segments = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(span_ps / kKnotSpacingPs)));
  s.knot_step_ps_ = span_ps > 0.0 ? span_ps / static_cast<double>(segments) : 1.0;

  s.rtt_knots_ps_.resize(static_cast<std::size_t>(segments) + 1);
  s.slope_knots_.resize(static_cast<std::size_t>(segments) + 1);
  for (std::int64_t j = 0; j <= segments; ++j) {
    const long double t_emit_ps = s.origin_ps_ + static_cast<long double>(j) * s.knot_step_ps_;
    const double t_emit = static_cast<double>(t_emit_ps / 1e12L);
    const double rtt = pass_.round_trip_time(t_emit);
    const double beta = pass_.radial_velocity(pass_.bounce_time(t_emit)) / kSpeedOfLight;
    s.rtt_knots_ps_[static_cast<std::size_t>(j)] = rtt * kPsPerSecond;
    s.slope_knots_[static_cast<std::size_t>(j)] = 2.0 * beta / (1.0 - beta);
  }
  return s;
}

double ArrivalTimeline::Slot::rtt_local(double u_ps) const {
  const auto segments = static_cast<std::int64_t>(rtt_knots_ps_.size()) - 1;
  const double h = knot_step_ps_;
  auto j = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(u_ps / h)), 0, segments - 1);
  const auto i = static_cast<std::size_t>(j);
  const double y0 = rtt_knots_ps_[i], y1 = rtt_knots_ps_[i + 1];
  const double m0 = h * slope_knots_[i], m1 = h * slope_knots_[i + 1];
  const double c2 = 3 * (y1 - y0) - 2 * m0 - m1;
  const double c3 = 2 * (y0 - y1) + m0 + m1;
  const double s = (u_ps - static_cast<double>(j) * h) / h;
  return y0 + s * (m0 + s * (c2 + s * c3));
}

double ArrivalTimeline::Slot::rtt_ps(std::int64_t pulse) const {
  const double u = static_cast<double>(pulse - pulses_.first) * static_cast<double>(owner_->period_ps_);
  return rtt_local(u);
}

long double ArrivalTimeline::Slot::arrival_ps(std::int64_t pulse) const {
  return owner_->emission_ps(pulse) + rtt_ps(pulse);
}

void ArrivalTimeline::Slot::fill_rtt_ps(std::int64_t first, std::span<double> out) const {
  const double period = static_cast<double>(owner_->period_ps_);
  const double h = knot_step_ps_;
  const auto segments = static_cast<std::int64_t>(rtt_knots_ps_.size()) - 1;
  std::size_t n = 0;
  while (n < out.size()) {
    const double u0 = static_cast<double>(first + static_cast<std::int64_t>(n) - pulses_.first) * period;
    auto j = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(u0 / h)), 0, segments - 1);
    const auto i = static_cast<std::size_t>(j);
    // Power-basis coefficients of the Hermite segment in s = (u - u_j)/h.
    const double y0 = rtt_knots_ps_[i], y1 = rtt_knots_ps_[i + 1];
    const double m0 = h * slope_knots_[i], m1 = h * slope_knots_[i + 1];
    const double c1 = m0;
    const double c2 = 3 * (y1 - y0) - 2 * m0 - m1;
    const double c3 = 2 * (y0 - y1) + m0 + m1;
    const double seg_start = static_cast<double>(j) * h;
    const double inv_h = 1.0 / h;
    // pulses of this segment still wanted, counted in integers
    const auto local = first + static_cast<std::int64_t>(n) - pulses_.first;
    std::size_t m = out.size() - n;
    if (j < segments - 1) {
      const auto end = static_cast<std::int64_t>(std::ceil((seg_start + h) / period));
      std::int64_t e = end;
      while (e > local && static_cast<double>(e - 1) * period >= seg_start + h) --e;
      while (static_cast<double>(e) * period < seg_start + h) ++e;
      m = std::min(m, static_cast<std::size_t>(std::max<std::int64_t>(e - local, 1)));
    }
    m = std::min<std::size_t>(m, 1u << 30);
    const double s0 = (static_cast<double>(local) * period - seg_start) * inv_h;
    const double ds = period * inv_h;
    double* dst = out.data() + n;
    // a 32-bit counter keeps the int-to-double conversion vectorizable
    const auto mi = static_cast<int>(m);
    for (int k = 0; k < mi; ++k) {
      const double s = s0 + static_cast<double>(k) * ds;
      dst[k] = y0 + s * (c1 + s * (c2 + s * c3));
    }
    n += m;
  }
}

std::int64_t ArrivalTimeline::Slot::first_arriving_at_or_after(long double t_ps) const {
  if (pulses_.empty()) return pulses_.last;
  const long double a0 = arrival_ps(pulses_.first);
  const long double a1 = arrival_ps(pulses_.last - 1);
  if (t_ps <= a0) return pulses_.first;
  if (t_ps > a1) return pulses_.last;
  const auto n = pulses_.size();
  std::int64_t i = pulses_.first;
  if (a1 > a0) {
    const long double frac = (t_ps - a0) / (a1 - a0);
    i += static_cast<std::int64_t>(frac * static_cast<long double>(n - 1));
  }
  i = std::clamp(i, pulses_.first, pulses_.last - 1);
  while (i > pulses_.first && arrival_ps(i - 1) >= t_ps) --i;
  while (i < pulses_.last && arrival_ps(i) < t_ps) ++i;
  return i;
}

std::int64_t ArrivalTimeline::Slot::nearest(long double t_ps) const {
  const std::int64_t j = first_arriving_at_or_after(t_ps);
  if (j == pulses_.last) return pulses_.last - 1;
  if (j == pulses_.first) return j;
  return (t_ps - arrival_ps(j - 1) <= arrival_ps(j) - t_ps) ? j - 1 : j;
}

std::vector<PulseRange> ArrivalTimeline::pulses_in_rx(std::int64_t k) const {
  std::vector<PulseRange> out;
  const Slot s = slot(k);
  if (s.pulses().empty()) return out;
  const long double slot_ps = static_cast<long double>(schedule_.slot_length_s) * 1e12L;
  const long double a0 = s.arrival_ps(s.pulses().first);
  const long double a1 = s.arrival_ps(s.pulses().last - 1);
  const auto m0 = static_cast<std::int64_t>(std::floor(a0 / slot_ps));
  const auto m1 = static_cast<std::int64_t>(std::floor(a1 / slot_ps));
  for (std::int64_t m = m0; m <= m1; ++m) {
    const long double lo = static_cast<long double>(m) * slot_ps + schedule_.rx.start_s * 1e12L;
    const long double hi = static_cast<long double>(m) * slot_ps + schedule_.rx.end_s * 1e12L;
    PulseRange r{s.first_arriving_at_or_after(lo), s.first_arriving_at_or_after(hi)};
    if (!r.empty()) out.push_back(r);
  }
  return out;
}

std::int64_t ArrivalTimeline::rx_slot_of(long double t_ps) const {
  const long double slot_ps = static_cast<long double>(schedule_.slot_length_s) * 1e12L;
  const auto m = static_cast<std::int64_t>(std::floor(t_ps / slot_ps));
  const long double local = t_ps - static_cast<long double>(m) * slot_ps;
  if (local >= schedule_.rx.start_s * 1e12L && local < schedule_.rx.end_s * 1e12L) return m;
  return -1;
}

std::vector<ExpectedArrival> expected_arrivals(const ArrivalTimeline& timeline, std::int64_t slot) {
  const auto s = timeline.slot(slot);
  const auto range = s.pulses();
  std::vector<ExpectedArrival> out;
  out.reserve(static_cast<std::size_t>(range.size()));
  std::vector<double> rtt(static_cast<std::size_t>(range.size()));
  s.fill_rtt_ps(range.first, rtt);
  for (std::int64_t i = range.first; i < range.last; ++i) {
    const long double exact = timeline.emission_ps(i) + rtt[static_cast<std::size_t>(i - range.first)];
    const long double rounded = std::nearbyint(exact);
    out.push_back({i, static_cast<std::int64_t>(rounded), static_cast<double>(exact - rounded)});
  }
  return out;
}

std::vector<ExpectedArrival> expected_arrivals(const PassModel& pass, const PulseSchedule& schedule) {
  const ArrivalTimeline timeline(pass, schedule);
  std::vector<ExpectedArrival> out;
  for (std::int64_t k = 0; k < timeline.slot_count(); ++k) {
    auto part = expected_arrivals(timeline, k);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace qlink

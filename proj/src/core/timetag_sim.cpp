#include "qlink/timetag_sim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qlink/constants.hpp"
#include "qlink/error.hpp"
#include "qlink/parallel.hpp"
#include "qlink/random.hpp"

namespace qlink {
namespace {

constexpr std::uint64_t kSlotStream = 1;
constexpr std::uint64_t kFadingStream = 2;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::config_invalid, what);
}

struct SlotOutput {
  std::vector<TimeTag> tags;
  double faded_pulses = 0.0;  // sum of fade * pulses in rx
  double pulses = 0.0;
};

}  // namespace

void SimConfig::validate() const {
  schedule.validate();
  budget.validate();
  fading.validate();
  detector.validate();
  require(fading_correlation_time_s > 0.0, "sim: fading correlation time must be positive");
  require(satellite_spread_fwhm_ps >= 0.0 && source_pulse_fwhm_ps >= 0.0, "sim: FWHM values must be nonnegative");
  require(mu_sat >= 0.0 && std::isfinite(mu_sat), "sim: mu_sat must be nonnegative");
  require(dark_rate_hz >= 0.0 && sky_rate_hz >= 0.0, "sim: rates must be nonnegative");
  require(tdc_resolution_ps >= 1.0 && std::isfinite(tdc_resolution_ps), "sim: tdc_resolution must be >= 1 ps");
}

double SimConfig::background_rate_hz() const {
  const double sky = sky_scaled_by_efficiency ? sky_rate_hz * budget.eta_rx * budget.eta_det : sky_rate_hz;
  return dark_rate_hz + sky;
}

double fading_factor(const SimConfig& cfg, std::int64_t index) {
  auto rng = make_rng(cfg.seed, kFadingStream, static_cast<std::uint64_t>(index));
  return sample_transmissivity_factor(cfg.fading, rng);
}

TimeTagStream simulate(const SimConfig& cfg) {
  cfg.validate();
  const ArrivalTimeline timeline(cfg.pass, cfg.schedule);
  const auto& sched = cfg.schedule;

  // The pass must cover every emission and bounce epoch of the schedule.
  try {
    (void)timeline.slot(0);
    (void)timeline.slot(timeline.slot_count() - 1);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::out_of_domain)
      throw Error(ErrorCode::config_invalid, std::string("pass does not cover schedule: ") + e.what());
    throw;
  }

  const ResponseSampler response(cfg.detector);
  const double source_sigma = cfg.source_pulse_fwhm_ps / kFwhmPerSigma;
  const double spread_sigma = cfg.satellite_spread_fwhm_ps / kFwhmPerSigma;
  const long double res = cfg.tdc_resolution_ps;
  const long double slot_ps = static_cast<long double>(sched.slot_length_s) * 1e12L;
  const long double pass_end_ps = static_cast<long double>(sched.pass_duration_s) * 1e12L;
  const long double fade_window_ps = static_cast<long double>(cfg.fading_correlation_time_s) * 1e12L;
  const double bg_rate = cfg.background_rate_hz();

  auto quantize = [res](long double t) { return static_cast<std::int64_t>(std::nearbyint(t / res) * res); };
  auto gated = [&](std::int64_t t) {
    return t >= 0 && static_cast<long double>(t) < pass_end_ps && timeline.rx_slot_of(t) >= 0;
  };

  std::vector<SlotOutput> slots(static_cast<std::size_t>(timeline.slot_count()));
  parallel_for(slots.size(), [&](std::size_t k) {
    auto rng = make_rng(cfg.seed, kSlotStream, k);
    auto& out = slots[k];
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    if (cfg.mu_sat > 0.0) {
      const auto slot = timeline.slot(static_cast<std::int64_t>(k));
      auto mu_at = [&](std::int64_t pulse) {
        const double t_emit = static_cast<double>(timeline.emission_ps(pulse) / 1e12L);
        return mu_received(cfg.budget, cfg.pass.range(t_emit), cfg.mu_sat);
      };
      for (const PulseRange& rx : timeline.pulses_in_rx(static_cast<std::int64_t>(k))) {
        // Split at fading-window boundaries; each piece has one multiplier.
        std::int64_t first = rx.first;
        while (first < rx.last) {
          const auto window = static_cast<std::int64_t>(std::floor(timeline.emission_ps(first) / fade_window_ps));
          std::int64_t last = rx.last;
          const long double window_end = static_cast<long double>(window + 1) * fade_window_ps;
          if (timeline.emission_ps(rx.last - 1) >= window_end) {
            last = first + 1;
            std::int64_t hi = rx.last;
            while (last < hi) {  // first pulse emitted at or after window_end
              const std::int64_t mid = last + (hi - last) / 2;
              if (timeline.emission_ps(mid) >= window_end) hi = mid;
              else last = mid + 1;
            }
          }
          const double fade = fading_factor(cfg, window);
          const auto n = static_cast<double>(last - first);
          out.faded_pulses += fade * n;
          out.pulses += n;

          // Poisson thinning against an upper bound of the per-pulse mean.
          double bound = 0.0;
          for (int j = 0; j <= 8; ++j) bound = std::max(bound, mu_at(first + (last - 1 - first) * j / 8));
          bound *= fade * (1.0 + 1e-3);
          if (bound > 0.0) {
            std::poisson_distribution<std::int64_t> candidates(bound * n);
            const std::int64_t count = candidates(rng);
            for (std::int64_t c = 0; c < count; ++c) {
              const auto pulse = first + std::min<std::int64_t>(static_cast<std::int64_t>(unit(rng) * n), last - first - 1);
              const double accept = unit(rng);
              const double jitter = response(rng) - cfg.detector.t0_ps + source_sigma * normal(rng) +
                                    spread_sigma * normal(rng);
              if (accept * bound >= mu_at(pulse) * fade) continue;
              const std::int64_t t = quantize(slot.arrival_ps(pulse) + jitter);
              if (gated(t)) out.tags.push_back({t, Channel::detector});
            }
          }
          first = last;
        }
      }
    }

    if (bg_rate > 0.0) {
      const long double rx_start = static_cast<long double>(k) * slot_ps + sched.rx.start_s * 1e12L;
      const long double rx_end = std::min(static_cast<long double>(k) * slot_ps + sched.rx.end_s * 1e12L, pass_end_ps);
      if (rx_end > rx_start) {
        const double open_s = static_cast<double>((rx_end - rx_start) / 1e12L);
        std::poisson_distribution<std::int64_t> background(bg_rate * open_s);
        const std::int64_t count = background(rng);
        for (std::int64_t c = 0; c < count; ++c) {
          const std::int64_t t = quantize(rx_start + static_cast<long double>(unit(rng)) * (rx_end - rx_start));
          if (gated(t)) out.tags.push_back({t, Channel::detector});
        }
      }
    }
    std::sort(out.tags.begin(), out.tags.end(),
              [](const TimeTag& a, const TimeTag& b) { return a.time_ps < b.time_ps; });
  });

  TimeTagStream stream;
  stream.meta.config_digest = cfg.config_digest;
  stream.meta.pass_id = cfg.pass_id;
  stream.meta.duration_s = sched.pass_duration_s;
  stream.meta.seed = cfg.seed;
  double faded = 0.0, pulses = 0.0;
  std::size_t total = 0;
  for (const auto& s : slots) total += s.tags.size();
  stream.tags.reserve(total);
  for (auto& s : slots) {
    stream.tags.insert(stream.tags.end(), s.tags.begin(), s.tags.end());
    faded += s.faded_pulses;
    pulses += s.pulses;
  }
  // Slots' rx windows are disjoint but signal may spill into a later
  // slot's window when the round trip exceeds a slot.
  if (!std::is_sorted(stream.tags.begin(), stream.tags.end(),
                      [](const TimeTag& a, const TimeTag& b) { return a.time_ps < b.time_ps; }))
    std::stable_sort(stream.tags.begin(), stream.tags.end(),
                     [](const TimeTag& a, const TimeTag& b) { return a.time_ps < b.time_ps; });
  if (pulses > 0.0) stream.meta.realized_fading_mean = faded / pulses;
  return stream;
}

}  // namespace qlink

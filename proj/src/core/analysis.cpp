#include "qlink/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qlink/constants.hpp"
#include "qlink/error.hpp"
#include "qlink/levenberg_marquardt.hpp"

namespace qlink {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;

void finish_match(DeltaSet& out, const TimeTag& tag, std::int64_t ref, std::int64_t pulse) {
  const std::int64_t d = tag.time_ps - ref;
  if (std::llabs(d) <= out.window_halfspan_ps) out.deltas.push_back({d, tag.time_ps, pulse});
  else ++out.unmatched;
}

std::int64_t round_ps(long double t) { return static_cast<std::int64_t>(std::nearbyint(t)); }

}  // namespace

DeltaSet compute_deltas(std::span<const TimeTag> tags, std::span<const ExpectedArrival> arrivals,
                        std::int64_t window_halfspan_ps) {
  DeltaSet out;
  out.window_halfspan_ps = window_halfspan_ps;
  const bool any_detector =
      std::any_of(tags.begin(), tags.end(), [](const TimeTag& t) { return t.channel == Channel::detector; });
  if (!any_detector || arrivals.empty()) throw Error(ErrorCode::empty_input, "no detector tags or no expected arrivals");

  std::size_t j = 0;
  for (const TimeTag& tag : tags) {
    if (tag.channel != Channel::detector) {
      ++out.markers;
      continue;
    }
    while (j + 1 < arrivals.size() && arrivals[j + 1].t_ref_ps <= tag.time_ps) ++j;
    std::size_t best = j;
    if (j + 1 < arrivals.size() && arrivals[j].t_ref_ps < tag.time_ps &&
        arrivals[j + 1].t_ref_ps - tag.time_ps < tag.time_ps - arrivals[j].t_ref_ps)
      best = j + 1;
    finish_match(out, tag, arrivals[best].t_ref_ps, arrivals[best].pulse_index);
  }
  return out;
}

DeltaSet compute_deltas(std::span<const TimeTag> tags, const ArrivalTimeline& timeline,
                        std::int64_t window_halfspan_ps) {
  DeltaSet out;
  out.window_halfspan_ps = window_halfspan_ps;
  const bool any_detector =
      std::any_of(tags.begin(), tags.end(), [](const TimeTag& t) { return t.channel == Channel::detector; });
  if (!any_detector || timeline.slot_count() == 0)
    throw Error(ErrorCode::empty_input, "no detector tags or no expected arrivals");

  const long double slot_ps = static_cast<long double>(timeline.schedule().slot_length_s) * 1e12L;
  // Small cache of slot interpolants; tags are sorted so slots are visited in order.
  std::vector<std::pair<std::int64_t, ArrivalTimeline::Slot>> cache;
  auto get_slot = [&](std::int64_t k) -> const ArrivalTimeline::Slot& {
    for (auto& [idx, s] : cache)
      if (idx == k) return s;
    if (cache.size() >= 4) cache.erase(cache.begin());
    cache.emplace_back(k, timeline.slot(k));
    return cache.back().second;
  };

  for (const TimeTag& tag : tags) {
    if (tag.channel != Channel::detector) {
      ++out.markers;
      continue;
    }
    // Locate the emission slot by stepping back one round trip; the nearest
    // arrival belongs to that slot or a neighbour.
    const auto& pass = timeline.pass();
    const double t_s = static_cast<double>(tag.time_ps) / kPsPerSecond;
    const double t_eval = std::clamp(t_s, std::max(pass.t_begin(), 0.0),
                                     std::min(pass.t_end(), timeline.schedule().pass_duration_s));
    const long double emit_ps = static_cast<long double>(tag.time_ps) - pass.round_trip_time(t_eval) * 1e12L;
    const auto k = static_cast<std::int64_t>(std::floor(emit_ps / slot_ps));
    std::int64_t best_ref = 0, best_pulse = -1;
    const auto k_lo = std::max<std::int64_t>(0, k - 1);
    const auto k_hi = std::min<std::int64_t>(timeline.slot_count() - 1, k + 1);
    for (std::int64_t m = k_lo; m <= k_hi; ++m) {
      const auto& s = get_slot(m);
      if (s.pulses().empty()) continue;
      const std::int64_t p = s.nearest(static_cast<long double>(tag.time_ps));
      for (std::int64_t q = std::max(p - 1, s.pulses().first); q <= std::min(p + 1, s.pulses().last - 1); ++q) {
        const std::int64_t ref = round_ps(s.arrival_ps(q));
        const std::int64_t dist = std::llabs(tag.time_ps - ref);
        const std::int64_t best_dist = std::llabs(tag.time_ps - best_ref);
        if (best_pulse < 0 || dist < best_dist || (dist == best_dist && ref < best_ref)) {
          best_ref = ref;
          best_pulse = q;
        }
      }
    }
    if (best_pulse < 0) {
      ++out.unmatched;
      continue;
    }
    finish_match(out, tag, best_ref, best_pulse);
  }
  return out;
}

std::vector<FrameStats> frame_statistics(const DeltaSet& deltas, const FrameOptions& options) {
  const double h = options.filter_halfwidth_ps;
  const auto halfspan = static_cast<double>(deltas.window_halfspan_ps);
  if (!(options.frame_length_s > 0.0)) throw Error(ErrorCode::invalid_range, "frame length must be positive");
  if (!(h > 0.0) || !(h < halfspan)) throw Error(ErrorCode::invalid_range, "filter must be narrower than the match window");

  const long double frame_ps = static_cast<long double>(options.frame_length_s) * 1e12L;
  std::int64_t frames = 0;
  if (options.duration_s > 0.0) {
    frames = static_cast<std::int64_t>(std::ceil(options.duration_s / options.frame_length_s - 1e-9));
  } else if (!deltas.deltas.empty()) {
    frames = static_cast<std::int64_t>(std::floor(deltas.deltas.back().tag_ps / frame_ps)) + 1;
  }
  if (frames <= 0) throw Error(ErrorCode::no_frames, "no frames to analyze");

  std::vector<FrameStats> out(static_cast<std::size_t>(frames));
  for (std::int64_t f = 0; f < frames; ++f) {
    auto& fs = out[static_cast<std::size_t>(f)];
    fs.frame_index = f;
    fs.frame_start_s = static_cast<double>(f) * options.frame_length_s;
    fs.frame_length_s = options.frame_length_s;
  }
  for (const Delta& d : deltas.deltas) {
    const auto f = static_cast<std::int64_t>(std::floor(d.tag_ps / frame_ps));
    if (f < 0 || f >= frames) continue;
    auto& fs = out[static_cast<std::size_t>(f)];
    if (std::fabs(static_cast<double>(d.delta_ps) - options.peak_center_ps) <= h) ++fs.in_window_counts;
    else ++fs.outside_counts;
  }

  const double scale = (2.0 * h) / (2.0 * halfspan - 2.0 * h);
  for (auto& fs : out) {
    fs.background_estimate = static_cast<double>(fs.outside_counts) * scale;
    fs.signal_counts = static_cast<double>(fs.in_window_counts) - fs.background_estimate;
    fs.signal_rate_cps = std::max(fs.signal_counts, 0.0) / fs.frame_length_s;
    fs.signal_rate_open_cps = fs.signal_rate_cps / options.rx_open_fraction;
    fs.snr = fs.signal_counts / std::max(fs.background_estimate, kSnrBackgroundFloor);
  }
  return out;
}

ArtsSummary arts_select(std::span<FrameStats> frames, double snr_threshold) {
  if (frames.empty()) throw Error(ErrorCode::no_frames, "ARTS selection needs at least one frame");
  ArtsSummary s;
  s.threshold = snr_threshold;
  double kept_rate = 0, kept_snr = 0, all_rate = 0, all_snr = 0;
  for (auto& f : frames) {
    f.kept_by_arts = f.snr >= snr_threshold;
    all_rate += f.signal_rate_cps;
    all_snr += f.snr;
    if (f.kept_by_arts) {
      ++s.kept;
      kept_rate += f.signal_rate_cps;
      kept_snr += f.snr;
    } else {
      ++s.discarded;
    }
  }
  const auto n = static_cast<double>(frames.size());
  s.discarded_fraction = static_cast<double>(s.discarded) / n;
  s.all_mean_rate_cps = all_rate / n;
  s.all_mean_snr = all_snr / n;
  s.all_discarded = s.kept == 0;
  if (s.kept > 0) {
    s.mean_rate_cps = kept_rate / static_cast<double>(s.kept);
    s.mean_snr = kept_snr / static_cast<double>(s.kept);
  }
  return s;
}

LognormalFit fit_rate_lognormal(std::span<const double> rates, double bin_width_hz) {
  if (!(bin_width_hz > 0.0)) throw Error(ErrorCode::invalid_range, "rate bin width must be positive");
  LognormalFit out;
  std::vector<double> positive, binned;
  for (double r : rates) {
    if (!std::isfinite(r) || r < 0.0) {
      ++out.excluded;
      continue;
    }
    // Zero-rate frames are the lower tail: they stay in the first bin of the
    // histogram but have no logarithm for the closed-form estimate.
    binned.push_back(r);
    if (r > 0.0) positive.push_back(r);
    else ++out.excluded;
  }
  out.used = positive.size();
  if (positive.size() < 30)
    throw Error(ErrorCode::too_few_frames,
                "lognormal fit needs at least 30 positive rates, got " + std::to_string(positive.size()));

  const auto n = static_cast<double>(positive.size());
  double mean = 0.0;
  for (double r : positive) mean += std::log(r);
  mean /= n;
  double var = 0.0;
  for (double r : positive) var += (std::log(r) - mean) * (std::log(r) - mean);
  var /= n;
  out.mle_ln_mu = mean;
  out.mle_ln_sigma = std::sqrt(var);

  const double max_rate = *std::max_element(positive.begin(), positive.end());
  const double hi = (std::floor(max_rate / bin_width_hz) + 1.0) * bin_width_hz;
  out.histogram = build_histogram(binned, bin_width_hz, 0.0, hi).histogram;
  const double n_hist = out.histogram.total();

  if (out.mle_ln_sigma < 1e-12) {
    out.degenerate = true;
    out.converged = true;
    out.ln_mu = mean;
    return out;
  }

  const auto& hist = out.histogram;
  const auto bins = static_cast<Eigen::Index>(hist.size());
  auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const double mu = p(0), sigma = std::exp(p(1));
    r.resize(bins);
    if (jac) jac->setZero(bins, 2);
    for (Eigen::Index i = 0; i < bins; ++i) {
      const double lo = hist.centers[static_cast<std::size_t>(i)] - 0.5 * bin_width_hz;
      const double up = lo + bin_width_hz;
      const double zh = (std::log(up) - mu) / sigma;
      const double cdf_h = 0.5 * std::erfc(-zh / kSqrt2);
      const double pdf_h = std::exp(-0.5 * zh * zh) / std::sqrt(2.0 * kPi);
      double cdf_l = 0.0, pdf_l = 0.0, zl = 0.0;
      if (lo > 0.0) {
        zl = (std::log(lo) - mu) / sigma;
        cdf_l = 0.5 * std::erfc(-zl / kSqrt2);
        pdf_l = std::exp(-0.5 * zl * zl) / std::sqrt(2.0 * kPi);
      }
      r(i) = n_hist * (cdf_h - cdf_l) - hist.counts[static_cast<std::size_t>(i)];
      if (jac) {
        (*jac)(i, 0) = n_hist * (pdf_l - pdf_h) / sigma;
        (*jac)(i, 1) = n_hist * (pdf_l * zl - pdf_h * zh);
      }
    }
  };
  Eigen::VectorXd p0(2);
  p0 << out.mle_ln_mu, std::log(out.mle_ln_sigma);
  const LmOutcome lm = levenberg_marquardt(residuals, p0);
  out.converged = lm.converged;
  out.ln_mu = lm.params(0);
  out.ln_sigma = std::exp(lm.params(1));
  out.si = std::expm1(out.ln_sigma * out.ln_sigma);

  const double dof = std::max<double>(1.0, static_cast<double>(bins) - 2.0);
  const Eigen::MatrixXd cov_log = (lm.cost / dof) * lm.normal_matrix.inverse();
  const double s = out.ln_sigma;
  const double c01 = 0.5 * s * (cov_log(0, 1) + cov_log(1, 0));
  out.covariance = {{{cov_log(0, 0), c01}, {c01, s * s * cov_log(1, 1)}}};
  out.si_error = 2.0 * s * std::exp(s * s) * std::sqrt(std::max(out.covariance[1][1], 0.0));
  return out;
}

void estimate_mu_sat(std::span<FrameStats> frames, const BudgetParams& budget, const ArrivalTimeline& timeline,
                     double filter_efficiency) {
  if (frames.empty()) return;
  if (!(filter_efficiency > 0.0 && filter_efficiency <= 1.0))
    throw Error(ErrorCode::invalid_range, "filter efficiency must be in (0, 1]");
  const double frame_len = frames.front().frame_length_s;
  const long double frame_ps = static_cast<long double>(frame_len) * 1e12L;
  for (auto& f : frames) f.rx_pulses = 0;

  for (std::int64_t k = 0; k < timeline.slot_count(); ++k) {
    const auto slot = timeline.slot(k);
    for (const PulseRange& r : timeline.pulses_in_rx(k)) {
      const long double a0 = slot.arrival_ps(r.first);
      const long double a1 = slot.arrival_ps(r.last - 1);
      const auto f0 = static_cast<std::int64_t>(std::floor(a0 / frame_ps));
      const auto f1 = static_cast<std::int64_t>(std::floor(a1 / frame_ps));
      for (std::int64_t f = std::max<std::int64_t>(f0, 0); f <= f1; ++f) {
        if (f >= static_cast<std::int64_t>(frames.size())) break;
        const std::int64_t lo = std::max(r.first, slot.first_arriving_at_or_after(static_cast<long double>(f) * frame_ps));
        const std::int64_t hi = std::min(r.last, slot.first_arriving_at_or_after(static_cast<long double>(f + 1) * frame_ps));
        if (hi > lo) frames[static_cast<std::size_t>(f)].rx_pulses += hi - lo;
      }
    }
  }

  const auto& pass = timeline.pass();
  for (auto& f : frames) {
    if (f.rx_pulses == 0 || f.signal_rate_cps <= 0.0) {
      f.mu_sat = 0.0;
      continue;
    }
    const double mu_rec = f.signal_rate_cps * f.frame_length_s / (static_cast<double>(f.rx_pulses) * filter_efficiency);
    const double mid = std::clamp(f.frame_start_s + 0.5 * f.frame_length_s, pass.t_begin(), pass.t_end());
    f.mu_sat = mu_sat_estimate(budget, pass.range(mid), mu_rec);
  }
}

void AnalysisSettings::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::config_invalid, what);
  };
  require(frame_ms > 0.0, "analysis: frame_ms must be positive");
  require(filter_ps > 0.0, "analysis: filter_ps must be positive");
  require(bin_ps > 0.0, "analysis: bin_ps must be positive");
  require(rate_bin_hz > 0.0, "analysis: rate_bin_hz must be positive");
  require(window_halfspan_ps > 0, "analysis: window_halfspan_ps must be positive");
  require(filter_ps < 2.0 * static_cast<double>(window_halfspan_ps), "analysis: filter wider than match window");
}

AnalysisResult analyze(const TimeTagStream& stream, const ArrivalTimeline& timeline, const BudgetParams& budget,
                       const AnalysisSettings& settings) {
  settings.validate();
  budget.validate();
  AnalysisResult out;
  out.tag_count = stream.tags.size();
  out.deltas = compute_deltas(stream.tags, timeline, settings.window_halfspan_ps);

  std::vector<double> values;
  values.reserve(out.deltas.deltas.size());
  for (const auto& d : out.deltas.deltas) values.push_back(static_cast<double>(d.delta_ps));
  const auto halfspan = static_cast<double>(settings.window_halfspan_ps);
  out.delta_histogram = build_histogram(values, settings.bin_ps, -halfspan, halfspan).histogram;

  out.fit = fit_response(out.delta_histogram);
  out.peak_center_ps = out.fit.params.peak_time();
  const double h = 0.5 * settings.filter_ps;
  const double total = integral(out.fit.params, -INFINITY, INFINITY);
  out.filter_efficiency =
      total > 0.0 ? integral(out.fit.params, out.peak_center_ps - h, out.peak_center_ps + h) / total : 1.0;

  const auto& sched = timeline.schedule();
  FrameOptions fo;
  fo.filter_halfwidth_ps = h;
  fo.frame_length_s = settings.frame_ms / 1e3;
  fo.peak_center_ps = out.peak_center_ps;
  fo.duration_s = sched.pass_duration_s;
  fo.rx_open_fraction = sched.rx.length() / sched.slot_length_s;
  out.frames = frame_statistics(out.deltas, fo);

  estimate_mu_sat(out.frames, budget, timeline, out.filter_efficiency);
  out.arts = arts_select(out.frames, settings.arts_threshold);

  std::vector<double> rates;
  rates.reserve(out.frames.size());
  for (const auto& f : out.frames) rates.push_back(f.signal_rate_cps);
  try {
    out.lognormal = fit_rate_lognormal(rates, settings.rate_bin_hz);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::too_few_frames) throw;
    out.lognormal_error = std::string(e.reason()) + ": " + e.what();
  }

  double all = 0.0, kept = 0.0;
  for (const auto& f : out.frames) {
    all += f.mu_sat;
    if (f.kept_by_arts) kept += f.mu_sat;
  }
  out.mu_sat_mean = all / static_cast<double>(out.frames.size());
  out.mu_sat_mean_kept = out.arts.kept > 0 ? kept / static_cast<double>(out.arts.kept) : 0.0;
  out.summary = {out.arts.mean_rate_cps, out.arts.mean_snr, out.mu_sat_mean, budget.eta_rx};
  return out;
}

}  // namespace qlink

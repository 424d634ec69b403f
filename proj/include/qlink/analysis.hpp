#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qlink/arrivals.hpp"
#include "qlink/detector_response.hpp"
#include "qlink/histogram.hpp"
#include "qlink/link_budget.hpp"
#include "qlink/timetag.hpp"

namespace qlink {

struct Delta {
  std::int64_t delta_ps;  // t_meas - t_ref
  std::int64_t tag_ps;
  std::int64_t pulse_index;
};

struct DeltaSet {
  std::vector<Delta> deltas;  // |delta_ps| <= window_halfspan_ps
  std::int64_t window_halfspan_ps = 5000;
  std::size_t unmatched = 0;  // detector tags whose nearest arrival is farther
  std::size_t markers = 0;    // marker-channel tags, not matched
};

/// Two-pointer match of each detector tag to its nearest expected arrival,
/// ties toward the earlier arrival. Both inputs sorted.
DeltaSet compute_deltas(std::span<const TimeTag> tags, std::span<const ExpectedArrival> arrivals,
                        std::int64_t window_halfspan_ps = 5000);

/// Same matching against a whole-pass timeline without materializing the
/// arrivals; each tag is located by inverting the monotone arrival curve.
DeltaSet compute_deltas(std::span<const TimeTag> tags, const ArrivalTimeline& timeline,
                        std::int64_t window_halfspan_ps = 5000);

struct FrameStats {
  std::int64_t frame_index = 0;
  double frame_start_s = 0.0;
  double frame_length_s = 0.2;
  std::int64_t in_window_counts = 0;
  std::int64_t outside_counts = 0;
  double background_estimate = 0.0;  // counts expected inside the filter
  double signal_counts = 0.0;        // in_window - background, signed
  double signal_rate_cps = 0.0;      // floored at 0, per wall-clock second
  double signal_rate_open_cps = 0.0; // per second of open receive shutter
  double snr = 0.0;
  std::int64_t rx_pulses = 0;
  double mu_sat = 0.0;
  bool kept_by_arts = true;
};

struct FrameOptions {
  double filter_halfwidth_ps = 200.0;
  double frame_length_s = 0.200;
  double peak_center_ps = 0.0;
  double duration_s = 0.0;         // 0: frames up to the last tag
  double rx_open_fraction = 1.0;   // share of wall time with rx open
};

inline constexpr double kSnrBackgroundFloor = 0.5;  // counts

std::vector<FrameStats> frame_statistics(const DeltaSet& deltas, const FrameOptions& options);

struct ArtsSummary {
  double threshold = 1.0;
  std::size_t kept = 0;
  std::size_t discarded = 0;
  double discarded_fraction = 0.0;
  double mean_rate_cps = 0.0;  // over kept frames
  double mean_snr = 0.0;
  double all_mean_rate_cps = 0.0;
  double all_mean_snr = 0.0;
  bool all_discarded = false;
};

/// Marks frames with snr < threshold as discarded and summarizes the rest.
ArtsSummary arts_select(std::span<FrameStats> frames, double snr_threshold = 1.0);

struct LognormalFit {
  double ln_mu = 0.0;
  double ln_sigma = 0.0;
  double si = 0.0;
  double si_error = 0.0;
  std::array<std::array<double, 2>, 2> covariance{};  // (ln_mu, ln_sigma)
  double mle_ln_mu = 0.0;
  double mle_ln_sigma = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // nonpositive rates, left out of the MLE
  bool degenerate = false;   // all rates equal: ln_sigma = SI = 0, no LSQ
  bool converged = false;
  Histogram histogram;
};

/// Least-squares fit of N * bin-integrated lognormal to the rate histogram,
/// started from and cross-checked by the closed-form MLE.
LognormalFit fit_rate_lognormal(std::span<const double> rates, double bin_width_hz = 25.0);

/// Fills rx_pulses and mu_sat. Signal counts are divided by the share of
/// the response inside the temporal filter before applying the budget.
void estimate_mu_sat(std::span<FrameStats> frames, const BudgetParams& budget, const ArrivalTimeline& timeline,
                     double filter_efficiency = 1.0);

struct AnalysisSettings {
  double frame_ms = 200.0;
  double filter_ps = 400.0;  // full width
  double bin_ps = 20.0;
  double rate_bin_hz = 25.0;
  double arts_threshold = 1.0;
  std::int64_t window_halfspan_ps = 5000;

  void validate() const;
};

struct AnalysisResult {
  std::size_t tag_count = 0;
  DeltaSet deltas;
  Histogram delta_histogram;
  FitResult fit;
  double peak_center_ps = 0.0;
  double filter_efficiency = 1.0;
  std::vector<FrameStats> frames;
  ArtsSummary arts;
  std::optional<LognormalFit> lognormal;
  std::string lognormal_error;
  double mu_sat_mean = 0.0;
  double mu_sat_mean_kept = 0.0;
  PassSummary summary{};
};

/// Full measurement chain: deltas, response fit, framing, mu_sat, ARTS and
/// the lognormal rate fit.
AnalysisResult analyze(const TimeTagStream& stream, const ArrivalTimeline& timeline, const BudgetParams& budget,
                       const AnalysisSettings& settings);

}  // namespace qlink

#pragma once

#include <cmath>
#include <optional>
#include <random>

#include "qlink/histogram.hpp"

namespace qlink {

/// Timing response: a Gaussian rise joined at t1 to an exponential decay,
///   f(t) = A exp(-(t-t0)^2 / 2 sigma^2)   for t <= t1
///   f(t) = B exp(-(t-t1) / tau)           for t >  t1
/// with B = A exp(-(t1-t0)^2 / 2 sigma^2) so that f is continuous at t1.
/// Times in picoseconds.
struct DetectorResponse {
  double sigma_ps = 60.0;
  double t0_ps = 0.0;
  double t1_ps = 0.0;
  double tau_ps = 200.0;
  double amplitude = 1.0;

  double crossover() const;  // B
  double peak_time() const;  // mode of f
  double peak_value() const;
  /// sigma, tau > 0, amplitude >= 0, all finite.
  void validate() const;
};

double eval(const DetectorResponse& r, double t_ps);

/// Integral of f over [a, b]; a may be -inf and b may be +inf.
double integral(const DetectorResponse& r, double a, double b);

/// Full width at half maximum, found by bisection to 1e-4 ps.
double fwhm(const DetectorResponse& r);

/// Draws times distributed with density proportional to f. The branch is
/// picked by its integral; the truncated Gaussian is sampled by rejection
/// (or by exponential-proposal rejection when truncated deep in its lower
/// tail) and the exponential tail by inverse CDF.
class ResponseSampler {
 public:
  explicit ResponseSampler(const DetectorResponse& r);

  double gaussian_branch_probability() const { return p_gaussian_; }

  template <class Rng>
  double operator()(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < p_gaussian_) return sample_gaussian(rng);
    std::exponential_distribution<double> tail(1.0 / r_.tau_ps);
    return r_.t1_ps + tail(rng);
  }

 private:
  template <class Rng>
  double sample_gaussian(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (cut_ > -1.0) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (;;) {
        const double z = normal(rng);
        if (z <= cut_) return r_.t0_ps + r_.sigma_ps * z;
      }
    }
    // Standard normal restricted to z <= cut_ < -1, sampled as -z >= a.
    const double a = -cut_;
    const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      const double z = a - std::log(1.0 - unit(rng)) / lambda;
      const double accept = std::exp(-0.5 * (z - lambda) * (z - lambda));
      if (unit(rng) <= accept) return r_.t0_ps - r_.sigma_ps * z;
    }
  }

  DetectorResponse r_;
  double cut_;  // (t1 - t0) / sigma
  double p_gaussian_;
};

template <class Rng>
double sample(const DetectorResponse& r, Rng& rng) {
  return ResponseSampler(r)(rng);
}

struct FitOptions {
  bool fit_background = true;  // flat per-bin offset fitted alongside f
  int max_iterations = 200;
  double relative_tolerance = 1e-9;
  bool throw_on_divergence = true;
};

struct FitResult {
  DetectorResponse params;
  double background = 0.0;  // counts per bin
  double fwhm_ps = 0.0;
  double residual_norm = 0.0;  // sqrt of weighted sum of squared residuals
  bool converged = false;
  int iterations = 0;
};

/// Weighted least squares (weights 1/max(count,1)) of f plus an optional
/// flat background to a histogram, evaluated at bin centers. sigma, tau and
/// A are fitted in log space; B is always derived. Without `init` the fit
/// is started from several crossover offsets and the lowest cost wins.
FitResult fit_response(const Histogram& hist, std::optional<DetectorResponse> init = std::nullopt,
                       const FitOptions& options = {});

/// Default starting point used by fit_response.
DetectorResponse initial_guess(const Histogram& hist, double background);

}  // namespace qlink

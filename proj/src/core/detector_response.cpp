#include "qlink/detector_response.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qlink/constants.hpp"
#include "qlink/error.hpp"
#include "qlink/levenberg_marquardt.hpp"

namespace qlink {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }
double normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }

double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(normal_cdf(z));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * kPi) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2));
}

// Phi(zh) - Phi(zl) without cancellation in either tail.
double normal_mass(double zl, double zh) {
  if (zl > 0.0) return normal_sf(zl) - normal_sf(zh);
  return normal_cdf(zh) - normal_cdf(zl);
}

double bisect(const DetectorResponse& r, double inside, double outside, double level) {
  for (int i = 0; i < 200 && std::fabs(outside - inside) > 1e-5; ++i) {
    const double mid = 0.5 * (inside + outside);
    (eval(r, mid) >= level ? inside : outside) = mid;
  }
  return 0.5 * (inside + outside);
}

}  // namespace

double DetectorResponse::crossover() const {
  const double d = (t1_ps - t0_ps) / sigma_ps;
  return amplitude * std::exp(-0.5 * d * d);
}

double DetectorResponse::peak_time() const { return std::min(t0_ps, t1_ps); }

double DetectorResponse::peak_value() const { return eval(*this, peak_time()); }

void DetectorResponse::validate() const {
  if (!(sigma_ps > 0.0) || !std::isfinite(sigma_ps)) throw Error(ErrorCode::config_invalid, "response sigma must be positive");
  if (!(tau_ps > 0.0) || !std::isfinite(tau_ps)) throw Error(ErrorCode::config_invalid, "response tau must be positive");
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
    throw Error(ErrorCode::config_invalid, "response amplitude must be nonnegative");
  if (!std::isfinite(t0_ps) || !std::isfinite(t1_ps)) throw Error(ErrorCode::config_invalid, "response t0/t1 must be finite");
}

double eval(const DetectorResponse& r, double t_ps) {
  if (t_ps <= r.t1_ps) {
    const double d = (t_ps - r.t0_ps) / r.sigma_ps;
    return r.amplitude * std::exp(-0.5 * d * d);
  }
  return r.crossover() * std::exp(-(t_ps - r.t1_ps) / r.tau_ps);
}

double integral(const DetectorResponse& r, double a, double b) {
  if (!(b > a)) return 0.0;
  double total = 0.0;
  if (a < r.t1_ps) {
    const double hi = std::min(b, r.t1_ps);
    const double zl = (a - r.t0_ps) / r.sigma_ps;
    const double zh = (hi - r.t0_ps) / r.sigma_ps;
    total += r.amplitude * r.sigma_ps * std::sqrt(2.0 * kPi) * normal_mass(zl, zh);
  }
  if (b > r.t1_ps) {
    const double lo = std::max(a, r.t1_ps);
    const double upper = std::isinf(b) ? 0.0 : std::exp(-(b - r.t1_ps) / r.tau_ps);
    total += r.crossover() * r.tau_ps * (std::exp(-(lo - r.t1_ps) / r.tau_ps) - upper);
  }
  return total;
}

double fwhm(const DetectorResponse& r) {
  const double peak = r.peak_time();
  const double half = 0.5 * eval(r, peak);
  if (!(half > 0.0)) throw Error(ErrorCode::no_crossing, "response has no positive maximum");

  double step = r.sigma_ps;
  while (eval(r, peak - step) >= half) {
    step *= 2.0;
    if (step > 1e15) throw Error(ErrorCode::no_crossing, "no rising half-maximum crossing");
  }
  const double rise = bisect(r, peak, peak - step, half);

  step = std::max(r.sigma_ps, r.tau_ps);
  while (eval(r, peak + step) >= half) {
    step *= 2.0;
    if (step > 1e15) throw Error(ErrorCode::no_crossing, "no falling half-maximum crossing");
  }
  const double fall = bisect(r, peak, peak + step, half);
  return fall - rise;
}

ResponseSampler::ResponseSampler(const DetectorResponse& r) : r_(r) {
  r_.validate();
  cut_ = (r.t1_ps - r.t0_ps) / r.sigma_ps;
  // Branch weights in log space; the amplitude cancels.
  const double log_gauss = std::log(r.sigma_ps * std::sqrt(2.0 * kPi)) + log_normal_cdf(cut_);
  const double log_tail = -0.5 * cut_ * cut_ + std::log(r.tau_ps);
  p_gaussian_ = 1.0 / (1.0 + std::exp(log_tail - log_gauss));
}

DetectorResponse initial_guess(const Histogram& hist, double background) {
  const auto& c = hist.counts;
  const auto mode = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
  DetectorResponse g;
  g.t0_ps = hist.centers[mode];
  g.t1_ps = g.t0_ps;
  g.amplitude = c[mode] - background;
  if (!(g.amplitude > 0.0)) throw Error(ErrorCode::degenerate_histogram, "histogram peak does not exceed background");

  const double half = background + 0.5 * g.amplitude;
  // Linear interpolation of the half-level crossings around the mode.
  std::size_t i = mode;
  while (i > 0 && c[i - 1] >= half) --i;
  double left = hist.centers[i];
  if (i > 0) left -= hist.bin_width * (c[i] - half) / (c[i] - c[i - 1]);
  std::size_t j = mode;
  while (j + 1 < c.size() && c[j + 1] >= half) ++j;
  double right = hist.centers[j];
  if (j + 1 < c.size()) right += hist.bin_width * (c[j] - half) / (c[j] - c[j + 1]);

  const double width = std::max(right - left, hist.bin_width);
  g.sigma_ps = 0.5 * width / 1.177;
  g.tau_ps = g.sigma_ps;
  return g;
}

FitResult fit_response(const Histogram& hist, std::optional<DetectorResponse> init, const FitOptions& options) {
  hist.validate();
  const auto nonzero = std::count_if(hist.counts.begin(), hist.counts.end(), [](double v) { return v > 0.0; });
  if (nonzero < 10)
    throw Error(ErrorCode::degenerate_histogram, "fit needs at least 10 nonzero bins, got " + std::to_string(nonzero));

  double background0 = 0.0;
  if (options.fit_background) {
    std::vector<double> sorted = hist.counts;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    background0 = sorted[sorted.size() / 2];
  }
  const DetectorResponse start = init ? *init : initial_guess(hist, background0);
  start.validate();
  if (!(start.amplitude > 0.0)) throw Error(ErrorCode::degenerate_histogram, "initial amplitude must be positive");

  const auto n = static_cast<Eigen::Index>(hist.size());
  const Eigen::Index np = options.fit_background ? 6 : 5;
  Eigen::VectorXd sqrt_w(n);
  for (Eigen::Index i = 0; i < n; ++i)
    sqrt_w(i) = 1.0 / std::sqrt(std::max(hist.counts[static_cast<std::size_t>(i)], 1.0));

  // p = [ln sigma, t0, t1, ln tau, ln A, background]
  auto unpack = [](const Eigen::VectorXd& p) {
    DetectorResponse r;
    r.sigma_ps = std::exp(p(0));
    r.t0_ps = p(1);
    r.t1_ps = p(2);
    r.tau_ps = std::exp(p(3));
    r.amplitude = std::exp(p(4));
    return r;
  };

  auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& res, Eigen::MatrixXd* jac) {
    const DetectorResponse r = unpack(p);
    const double bg = np == 6 ? p(5) : 0.0;
    const double b = r.crossover();
    const double s2 = r.sigma_ps * r.sigma_ps;
    const double d1 = r.t1_ps - r.t0_ps;
    res.resize(n);
    if (jac) jac->setZero(n, np);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = hist.centers[static_cast<std::size_t>(i)];
      const double w = sqrt_w(i);
      double f;
      if (t <= r.t1_ps) {
        const double dt = t - r.t0_ps;
        f = r.amplitude * std::exp(-0.5 * dt * dt / s2);
        if (jac) {
          (*jac)(i, 0) = w * f * dt * dt / s2;  // d/d ln sigma
          (*jac)(i, 1) = w * f * dt / s2;
          (*jac)(i, 4) = w * f;
        }
      } else {
        const double dt = t - r.t1_ps;
        f = b * std::exp(-dt / r.tau_ps);
        if (jac) {
          (*jac)(i, 0) = w * f * d1 * d1 / s2;
          (*jac)(i, 1) = w * f * d1 / s2;
          (*jac)(i, 2) = w * f * (1.0 / r.tau_ps - d1 / s2);
          (*jac)(i, 3) = w * f * dt / r.tau_ps;  // d/d ln tau
          (*jac)(i, 4) = w * f;
        }
      }
      if (jac && np == 6) (*jac)(i, 5) = w;
      res(i) = w * (f + bg - hist.counts[static_cast<std::size_t>(i)]);
    }
  };

  auto feasible = [&](const Eigen::VectorXd& p) {
    if (!p.allFinite()) return false;
    const double sigma = std::exp(p(0));
    return sigma > 0.0 && std::isfinite(sigma) && std::exp(p(3)) > 0.0 && p(2) >= p(1) - 5.0 * sigma;
  };

  LmSettings settings;
  settings.max_iterations = options.max_iterations;
  settings.relative_tolerance = options.relative_tolerance;

  auto run = [&](double t1) {
    Eigen::VectorXd p0(np);
    p0.head<5>() << std::log(start.sigma_ps), start.t0_ps, t1, std::log(start.tau_ps), std::log(start.amplitude);
    if (np == 6) p0(5) = background0;
    if (!feasible(p0)) p0(2) = p0(1);
    return levenberg_marquardt(residuals, p0, settings, feasible);
  };

  // The cost has shallow local minima in t1; without a caller-supplied start
  // a few crossover offsets are tried and the best converged one is kept.
  LmOutcome lm = run(start.t1_ps);
  if (!init) {
    for (double k : {-1.0, 1.0, 2.0}) {
      LmOutcome alt = run(start.t0_ps + k * start.sigma_ps);
      if (alt.converged && (!lm.converged || alt.cost < lm.cost)) lm = std::move(alt);
    }
  }

  FitResult out;
  out.params = unpack(lm.params);
  out.background = np == 6 ? lm.params(5) : 0.0;
  out.residual_norm = std::sqrt(lm.cost);
  out.converged = lm.converged;
  out.iterations = lm.iterations;
  if (!lm.converged && options.throw_on_divergence)
    throw Error(ErrorCode::fit_diverged, "response fit did not converge in " + std::to_string(lm.iterations) +
                                             " iterations");
  out.fwhm_ps = fwhm(out.params);
  return out;
}

}  // namespace qlink

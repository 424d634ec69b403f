#include "qlink/pass_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "qlink/constants.hpp"
#include "qlink/error.hpp"
#include "csv_util.hpp"

namespace qlink {
namespace {

// Derivative at xs[0] of the cubic through four points.
double lagrange_slope(const double* xs, const double* ys) {
  double slope = 0.0;
  for (int j = 0; j < 4; ++j) {
    double d = 0.0;
    if (j == 0) {
      for (int k = 1; k < 4; ++k) d += 1.0 / (xs[0] - xs[k]);
    } else {
      double num = 1.0, den = 1.0;
      for (int k = 0; k < 4; ++k) {
        if (k == j) continue;
        den *= xs[j] - xs[k];
        if (k != 0) num *= xs[0] - xs[k];
      }
      d = num / den;
    }
    slope += ys[j] * d;
  }
  return slope;
}

}  // namespace

SampledProfile::SampledProfile(std::vector<ProfileSample> samples) : samples_(std::move(samples)) {
  const std::size_t n = samples_.size();
  if (n < 4) throw Error(ErrorCode::config_invalid, "sampled profile needs at least 4 points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(samples_[i].t_s) || !std::isfinite(samples_[i].range_m) ||
        samples_[i].range_m <= 0.0)
      throw Error(ErrorCode::config_invalid,
                  "sampled profile point " + std::to_string(i) + " must have finite t and positive range");
    if (i > 0 && !(samples_[i].t_s > samples_[i - 1].t_s))
      throw Error(ErrorCode::config_invalid,
                  "sampled profile times must be strictly increasing (point " + std::to_string(i) + ")");
  }

  std::vector<double> t(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = samples_[i].t_s;
    y[i] = samples_[i].range_m;
  }

  slopes_.assign(n, 0.0);
  slopes_[0] = lagrange_slope(t.data(), y.data());
  {
    const double tr[4] = {t[n - 1], t[n - 2], t[n - 3], t[n - 4]};
    const double yr[4] = {y[n - 1], y[n - 2], y[n - 3], y[n - 4]};
    slopes_[n - 1] = lagrange_slope(tr, yr);
  }

  // Interior slopes from C2 continuity, solved with the Thomas algorithm.
  const std::size_t m = n - 2;
  if (m == 0) return;
  std::vector<double> a(m), b(m), c(m), d(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = k + 1;
    const double h0 = t[i] - t[i - 1];
    const double h1 = t[i + 1] - t[i];
    const double d0 = (y[i] - y[i - 1]) / h0;
    const double d1 = (y[i + 1] - y[i]) / h1;
    a[k] = h1;
    b[k] = 2.0 * (h0 + h1);
    c[k] = h0;
    d[k] = 3.0 * (h1 * d0 + h0 * d1);
  }
  d[0] -= a[0] * slopes_[0];
  d[m - 1] -= c[m - 1] * slopes_[n - 1];
  for (std::size_t k = 1; k < m; ++k) {
    const double w = a[k] / b[k - 1];
    b[k] -= w * c[k - 1];
    d[k] -= w * d[k - 1];
  }
  slopes_[m] = d[m - 1] / b[m - 1];
  for (std::size_t k = m - 1; k-- > 0;) slopes_[k + 1] = (d[k] - c[k] * slopes_[k + 2]) / b[k];
}

std::size_t SampledProfile::segment(double t_s) const {
  auto it = std::upper_bound(samples_.begin(), samples_.end(), t_s,
                             [](double v, const ProfileSample& s) { return v < s.t_s; });
  std::size_t i = static_cast<std::size_t>(it - samples_.begin());
  if (i == 0) return 0;
  return std::min(i - 1, samples_.size() - 2);
}

double SampledProfile::range(double t_s) const {
  const std::size_t i = segment(t_s);
  const double h = samples_[i + 1].t_s - samples_[i].t_s;
  const double s = (t_s - samples_[i].t_s) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * samples_[i].range_m + (s3 - 2 * s2 + s) * h * slopes_[i] +
         (-2 * s3 + 3 * s2) * samples_[i + 1].range_m + (s3 - s2) * h * slopes_[i + 1];
}

double SampledProfile::rate(double t_s) const {
  const std::size_t i = segment(t_s);
  const double h = samples_[i + 1].t_s - samples_[i].t_s;
  const double s = (t_s - samples_[i].t_s) / h;
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * samples_[i].range_m + (-6 * s2 + 6 * s) * samples_[i + 1].range_m) / h +
         (3 * s2 - 4 * s + 1) * slopes_[i] + (3 * s2 - 2 * s) * slopes_[i + 1];
}

PassModel::PassModel(AnalyticFlyby flyby, double t_begin, double t_end)
    : geometry_(flyby), t_begin_(t_begin), t_end_(t_end) {
  if (!(flyby.r_min_m > 0.0) || !std::isfinite(flyby.r_min_m))
    throw Error(ErrorCode::config_invalid, "flyby r_min must be positive");
  if (!std::isfinite(flyby.v_tangential_mps) || !std::isfinite(flyby.t_closest_s))
    throw Error(ErrorCode::config_invalid, "flyby velocity and closest-approach time must be finite");
  if (!(t_end > t_begin)) throw Error(ErrorCode::config_invalid, "pass interval is empty");
}

PassModel::PassModel(SampledProfile profile)
    : geometry_(std::move(profile)), t_begin_(0.0), t_end_(0.0) {
  const auto& p = std::get<SampledProfile>(geometry_);
  t_begin_ = p.t_begin();
  t_end_ = p.t_end();
}

void PassModel::check_domain(double t_s) const {
  if (!contains(t_s)) {
    std::ostringstream msg;
    msg << "t = " << t_s << " s outside pass interval [" << t_begin_ << ", " << t_end_ << "]";
    throw Error(ErrorCode::out_of_domain, msg.str());
  }
}

double PassModel::range(double t_s) const {
  check_domain(t_s);
  if (const auto* f = flyby()) {
    const double x = f->v_tangential_mps * (t_s - f->t_closest_s);
    return std::hypot(f->r_min_m, x);
  }
  return profile()->range(t_s);
}

double PassModel::radial_velocity(double t_s) const {
  check_domain(t_s);
  if (const auto* f = flyby()) {
    const double dt = t_s - f->t_closest_s;
    const double v2 = f->v_tangential_mps * f->v_tangential_mps;
    return v2 * dt / std::hypot(f->r_min_m, f->v_tangential_mps * dt);
  }
  return profile()->rate(t_s);
}

double PassModel::bounce_time(double t_emit_s) const {
  check_domain(t_emit_s);
  double t_bounce = t_emit_s;
  for (int i = 0; i < kLightTimeIterations; ++i) t_bounce = t_emit_s + range(t_bounce) / kSpeedOfLight;
  return t_bounce;
}

double PassModel::round_trip_time(double t_emit_s) const {
  const double t_bounce = bounce_time(t_emit_s);
  return (t_bounce - t_emit_s) + range(t_bounce) / kSpeedOfLight;
}

SampledProfile read_profile_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open profile " + path.string());
  std::vector<ProfileSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (csv::strip_cr(line) != "t_s,range_m")
        throw Error(ErrorCode::format_error, path.string() + ":1: expected header 't_s,range_m'");
      continue;
    }
    if (csv::strip_cr(line).empty()) continue;
    const auto fields = csv::split(csv::strip_cr(line));
    double t = 0, r = 0;
    if (fields.size() != 2 || !csv::parse_double(fields[0], t) || !csv::parse_double(fields[1], r))
      throw Error(ErrorCode::format_error, path.string() + ":" + std::to_string(line_no) + ": malformed row");
    samples.push_back({t, r});
  }
  if (line_no == 0) throw Error(ErrorCode::format_error, path.string() + ": empty file");
  return SampledProfile(std::move(samples));
}

}  // namespace qlink

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <variant>
#include <vector>

namespace qlink {

/// Straight-line constant-speed flyby: R(t) = sqrt(R_min^2 + v^2 (t - t_ca)^2).
struct AnalyticFlyby {
  double r_min_m = 8.2e6;
  double v_tangential_mps = 0.0;
  double t_closest_s = 0.0;
};

struct ProfileSample {
  double t_s;
  double range_m;
};

/// Range samples joined by a clamped cubic spline. End slopes come from the
/// cubic through the four outermost samples on each side.
class SampledProfile {
 public:
  explicit SampledProfile(std::vector<ProfileSample> samples);

  double range(double t_s) const;
  double rate(double t_s) const;
  double t_begin() const { return samples_.front().t_s; }
  double t_end() const { return samples_.back().t_s; }
  std::span<const ProfileSample> samples() const { return samples_; }

 private:
  std::size_t segment(double t_s) const;

  std::vector<ProfileSample> samples_;
  std::vector<double> slopes_;
};

/// Pass geometry as a one-dimensional range profile. Immutable after
/// construction; all queries are pure.
class PassModel {
 public:
  PassModel() : PassModel(AnalyticFlyby{}) {}
  explicit PassModel(AnalyticFlyby flyby,
                     double t_begin = -std::numeric_limits<double>::infinity(),
                     double t_end = std::numeric_limits<double>::infinity());
  explicit PassModel(SampledProfile profile);

  double range(double t_s) const;
  double radial_velocity(double t_s) const;

  /// Round-trip light time for a pulse emitted at t_emit. The bounce epoch
  /// solves t_b = t_emit + R(t_b)/c by three fixed-point iterations.
  double round_trip_time(double t_emit_s) const;

  /// Bounce epoch used by round_trip_time(); exposed for residual checks.
  double bounce_time(double t_emit_s) const;

  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }
  bool contains(double t_s) const { return t_s >= t_begin_ && t_s <= t_end_; }

  bool is_analytic() const { return std::holds_alternative<AnalyticFlyby>(geometry_); }
  const AnalyticFlyby* flyby() const { return std::get_if<AnalyticFlyby>(&geometry_); }
  const SampledProfile* profile() const { return std::get_if<SampledProfile>(&geometry_); }

 private:
  void check_domain(double t_s) const;

  std::variant<AnalyticFlyby, SampledProfile> geometry_;
  double t_begin_;
  double t_end_;
};

/// Reads a `t_s,range_m` CSV profile.
SampledProfile read_profile_csv(const std::filesystem::path& path);

inline constexpr int kLightTimeIterations = 3;

}  // namespace qlink

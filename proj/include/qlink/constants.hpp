#pragma once

namespace qlink {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s, exact
inline constexpr double kPsPerSecond = 1e12;
// Ratio FWHM / sigma of a Gaussian, 2*sqrt(2 ln 2).
inline constexpr double kFwhmPerSigma = 2.3548200450309493;
inline constexpr double kPi = 3.14159265358979323846;

}  // namespace qlink

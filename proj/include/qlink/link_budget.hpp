#pragma once

#include <cmath>
#include <optional>
#include <random>

#include "qlink/constants.hpp"

namespace qlink {

struct AtmosphereModel {
  enum class Mode { fixed, zenith_scaled };
  double t_zenith = 0.7;
  Mode mode = Mode::fixed;
  double zenith_angle_rad = 0.0;

  /// T_zenith, or T_zenith^(1/cos z) in zenith-scaled mode (z < 85 deg).
  double transmittance() const;
  void validate() const;
};

/// Downlink radar-equation constants for a CCR-equipped target.
struct BudgetParams {
  double cross_section_m2 = 15e6;   // array optical cross-section
  double ccr_area_m2 = 11.4e-4;     // reflective area of one CCR
  double ccr_reflectance = 0.89;
  double effective_ccr_count = 9.88;
  double telescope_area_m2 = kPi * 0.75 * 0.75;
  double eta_rx = 0.13;
  double eta_det = 0.5;
  AtmosphereModel atmosphere;

  void validate() const;
};

/// Far-field solid angle 4 pi A_ccr rho N_eff / Sigma.
double solid_angle(const BudgetParams& p);
/// Full cone angle with the same solid angle, 2 sqrt(Omega / pi).
double equivalent_aperture(double solid_angle_sr);

struct DiffractionTransmittance {
  double value;
  bool clamped;  // geometry gave more than unity
};

/// Top-hat far-field collection A_tel / (Omega R^2), clamped to 1.
DiffractionTransmittance diffraction_transmittance(const BudgetParams& p, double range_m);

/// T_diff * T_A * eta_rx * eta_det.
double downlink_efficiency(const BudgetParams& p, double range_m);
double mu_received(const BudgetParams& p, double range_m, double mu_sat);
double mu_sat_estimate(const BudgetParams& p, double range_m, double mu_rec);

inline double to_db(double ratio) { return 10.0 * std::log10(ratio); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

/// Lognormal channel: ln X ~ N(ln_mu, ln_sigma^2). ln_sigma == 0 disables fading.
struct FadingModel {
  double ln_mu = 0.0;
  double ln_sigma = 1.4;

  void validate() const;
};

double fading_pdf(const FadingModel& f, double x);
double scintillation_index(const FadingModel& f);

/// Draw of L / E[L] for L ~ LN(ln_mu, ln_sigma): unit mean, same SI.
template <class Rng>
double sample_transmissivity_factor(const FadingModel& f, Rng& rng) {
  if (f.ln_sigma == 0.0) return 1.0;
  std::normal_distribution<double> normal(0.0, f.ln_sigma);
  return std::exp(normal(rng) - 0.5 * f.ln_sigma * f.ln_sigma);
}

struct PassSummary {
  double rate_cps;
  double snr;
  double mu_sat;
  double eta_rx;
};

enum class BackgroundMode { dark_dominated, scales_with_eta_rx };

struct ScenarioChanges {
  double diffraction_gain_db = 0.0;
  std::optional<double> eta_rx_new;  // unset keeps the base value
  std::optional<double> mu_sat_new;
  BackgroundMode background = BackgroundMode::dark_dominated;
};

struct ProjectedLink {
  double rate_cps;
  double snr;
};

/// Scales a measured link by the signal gain of the changes. In
/// dark-dominated mode the background is unchanged; otherwise it follows
/// eta_rx.
ProjectedLink project_scenario(const PassSummary& base, const ScenarioChanges& changes);

}  // namespace qlink

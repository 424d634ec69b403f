#include "qlink/link_budget.hpp"

#include <cmath>
#include <string>

#include "qlink/error.hpp"

namespace qlink {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::config_invalid, what);
}

}  // namespace

double AtmosphereModel::transmittance() const {
  if (mode == Mode::fixed) return t_zenith;
  return std::pow(t_zenith, 1.0 / std::cos(zenith_angle_rad));
}

void AtmosphereModel::validate() const {
  require(t_zenith > 0.0 && t_zenith <= 1.0, "atmosphere: t_zenith must be in (0, 1]");
  if (mode == Mode::zenith_scaled)
    require(zenith_angle_rad >= 0.0 && zenith_angle_rad < 85.0 * kPi / 180.0,
            "atmosphere: zenith angle must be in [0, 85) degrees");
}

void BudgetParams::validate() const {
  require(cross_section_m2 > 0.0, "budget: cross section must be positive");
  require(ccr_area_m2 > 0.0, "budget: CCR area must be positive");
  require(ccr_reflectance > 0.0 && ccr_reflectance <= 1.0, "budget: CCR reflectance must be in (0, 1]");
  require(effective_ccr_count > 0.0, "budget: effective CCR count must be positive");
  require(telescope_area_m2 > 0.0, "budget: telescope area must be positive");
  require(eta_rx > 0.0 && eta_rx <= 1.0, "budget: eta_rx must be in (0, 1]");
  require(eta_det > 0.0 && eta_det <= 1.0, "budget: eta_det must be in (0, 1]");
  atmosphere.validate();
}

double solid_angle(const BudgetParams& p) {
  return 4.0 * kPi * p.ccr_area_m2 * p.ccr_reflectance * p.effective_ccr_count / p.cross_section_m2;
}

double equivalent_aperture(double solid_angle_sr) { return 2.0 * std::sqrt(solid_angle_sr / kPi); }

DiffractionTransmittance diffraction_transmittance(const BudgetParams& p, double range_m) {
  if (!(range_m > 0.0)) throw Error(ErrorCode::domain_error, "range must be positive");
  const double t = p.telescope_area_m2 / (solid_angle(p) * range_m * range_m);
  if (t > 1.0) return {1.0, true};
  return {t, false};
}

double downlink_efficiency(const BudgetParams& p, double range_m) {
  return diffraction_transmittance(p, range_m).value * p.atmosphere.transmittance() * p.eta_rx * p.eta_det;
}

double mu_received(const BudgetParams& p, double range_m, double mu_sat) {
  if (!(mu_sat >= 0.0)) throw Error(ErrorCode::domain_error, "mu_sat must be nonnegative");
  return mu_sat * downlink_efficiency(p, range_m);
}

double mu_sat_estimate(const BudgetParams& p, double range_m, double mu_rec) {
  if (!(mu_rec >= 0.0)) throw Error(ErrorCode::domain_error, "mu_rec must be nonnegative");
  const double eff = downlink_efficiency(p, range_m);
  if (!(eff > 0.0) || !std::isfinite(eff))
    throw Error(ErrorCode::division_degenerate, "downlink efficiency underflows to zero");
  return mu_rec / eff;
}

void FadingModel::validate() const {
  require(std::isfinite(ln_mu), "fading: ln_mu must be finite");
  require(ln_sigma >= 0.0 && std::isfinite(ln_sigma), "fading: ln_sigma must be nonnegative");
}

double fading_pdf(const FadingModel& f, double x) {
  if (!(x > 0.0)) throw Error(ErrorCode::domain_error, "lognormal density needs x > 0");
  if (!(f.ln_sigma > 0.0)) throw Error(ErrorCode::domain_error, "lognormal density needs ln_sigma > 0");
  const double z = (std::log(x) - f.ln_mu) / f.ln_sigma;
  return std::exp(-0.5 * z * z) / (x * f.ln_sigma * std::sqrt(2.0 * kPi));
}

double scintillation_index(const FadingModel& f) { return std::expm1(f.ln_sigma * f.ln_sigma); }

ProjectedLink project_scenario(const PassSummary& base, const ScenarioChanges& changes) {
  const double eta_ratio = changes.eta_rx_new.value_or(base.eta_rx) / base.eta_rx;
  const double mu_ratio = changes.mu_sat_new.value_or(base.mu_sat) / base.mu_sat;
  const double gain = from_db(changes.diffraction_gain_db);
  if (!(eta_ratio > 0.0) || !(mu_ratio > 0.0) || !std::isfinite(eta_ratio) || !std::isfinite(mu_ratio) ||
      !std::isfinite(gain))
    throw Error(ErrorCode::invalid_scenario, "scenario ratios must be positive and finite");
  const double factor = mu_ratio * gain * eta_ratio;
  ProjectedLink out{base.rate_cps * factor, base.snr * factor};
  if (changes.background == BackgroundMode::scales_with_eta_rx) out.snr /= eta_ratio;
  return out;
}

}  // namespace qlink

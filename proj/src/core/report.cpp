#include "qlink/report.hpp"

#include <chrono>
#include <ctime>

#include "json.hpp"
#include "qlink/error.hpp"

namespace qlink {
namespace {

using json = nlohmann::ordered_json;

json fit_json(const FitResult& fit) {
  const auto& p = fit.params;
  json j;
  j["sigma_ps"] = p.sigma_ps;
  j["t0_ps"] = p.t0_ps;
  j["t1_ps"] = p.t1_ps;
  j["tau_ps"] = p.tau_ps;
  j["amplitude"] = p.amplitude;
  j["b"] = p.crossover();
  j["background"] = fit.background;
  j["fwhm_ps"] = fit.fwhm_ps;
  j["residual_norm"] = fit.residual_norm;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  return j;
}

}  // namespace

std::string budget_report(const BudgetParams& budget, double range_m) {
  budget.validate();
  if (!(range_m > 0.0) || !std::isfinite(range_m)) throw Error(ErrorCode::invalid_range, "range must be positive");
  const double omega = solid_angle(budget);
  const auto t = diffraction_transmittance(budget, range_m);
  json j;
  j["range_m"] = range_m;
  j["omega_sr"] = omega;
  j["aperture_urad"] = equivalent_aperture(omega) * 1e6;
  j["t_diff"] = t.value;
  j["t_diff_db"] = to_db(t.value);
  j["t_diff_clamped"] = t.clamped;
  j["t_atm"] = budget.atmosphere.transmittance();
  j["mu_rec_per_mu_sat"] = downlink_efficiency(budget, range_m);
  return j.dump(2);
}

std::string analysis_report(const AnalysisResult& r, const RunConfig& config, const StreamMetadata& meta,
                            std::string_view generated_at) {
  json j;
  j["generated_at"] = generated_at;
  j["config_digest"] = config.digest;
  j["stream"] = {{"pass_id", meta.pass_id},
                 {"config_digest", meta.config_digest},
                 {"digest_matches", meta.config_digest.empty() || meta.config_digest == config.digest},
                 {"seed", meta.seed ? json(*meta.seed) : json(nullptr)}};
  j["tags"] = {{"total", r.tag_count},
               {"markers", r.deltas.markers},
               {"matched", r.deltas.deltas.size()},
               {"unmatched", r.deltas.unmatched}};

  json fit = fit_json(r.fit);
  fit["peak_center_ps"] = r.peak_center_ps;
  fit["filter_efficiency"] = r.filter_efficiency;
  j["response_fit"] = fit;

  j["arts"] = {{"threshold", r.arts.threshold},
               {"kept", r.arts.kept},
               {"discarded", r.arts.discarded},
               {"discarded_fraction", r.arts.discarded_fraction},
               {"mean_rate_cps", r.arts.mean_rate_cps},
               {"mean_snr", r.arts.mean_snr},
               {"all_mean_rate_cps", r.arts.all_mean_rate_cps},
               {"all_mean_snr", r.arts.all_mean_snr},
               {"all_discarded", r.arts.all_discarded}};

  if (r.lognormal) {
    const auto& l = *r.lognormal;
    j["lognormal"] = {{"ln_mu", l.ln_mu},
                      {"ln_sigma", l.ln_sigma},
                      {"si", l.si},
                      {"si_error", l.si_error},
                      {"covariance", l.covariance},
                      {"mle_ln_mu", l.mle_ln_mu},
                      {"mle_ln_sigma", l.mle_ln_sigma},
                      {"used", l.used},
                      {"excluded", l.excluded},
                      {"degenerate", l.degenerate},
                      {"converged", l.converged}};
  } else {
    j["lognormal"] = {{"error", r.lognormal_error}};
  }

  j["mu_sat"] = {{"mean", r.mu_sat_mean}, {"mean_kept", r.mu_sat_mean_kept}};
  j["summary"] = {{"rate_cps", r.summary.rate_cps},
                  {"snr", r.summary.snr},
                  {"mu_sat", r.summary.mu_sat},
                  {"eta_rx", r.summary.eta_rx}};

  json frames = json::array();
  for (const auto& f : r.frames) {
    frames.push_back({{"index", f.frame_index},
                      {"start_s", f.frame_start_s},
                      {"in_window", f.in_window_counts},
                      {"outside", f.outside_counts},
                      {"background", f.background_estimate},
                      {"signal", f.signal_counts},
                      {"rate_cps", f.signal_rate_cps},
                      {"rate_open_cps", f.signal_rate_open_cps},
                      {"snr", f.snr},
                      {"rx_pulses", f.rx_pulses},
                      {"mu_sat", f.mu_sat},
                      {"kept", f.kept_by_arts}});
  }
  j["frames"] = std::move(frames);
  return j.dump(2);
}

void write_analysis_histograms(const AnalysisResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
  write_histogram_csv(r.delta_histogram, dir / "delta_histogram.csv", "bin_center_ps");
  if (r.lognormal) write_histogram_csv(r.lognormal->histogram, dir / "rate_histogram.csv", "bin_center_hz");
}

PassSummary summary_from_report(std::string_view report_json) {
  json j;
  try {
    j = json::parse(report_json.begin(), report_json.end());
    const auto& s = j.at("summary");
    return {s.at("rate_cps").get<double>(), s.at("snr").get<double>(), s.at("mu_sat").get<double>(),
            s.at("eta_rx").get<double>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::format_error, std::string("report has no usable summary: ") + e.what());
  }
}

std::string scenario_report(const PassSummary& base, const ScenarioChanges& changes) {
  const ProjectedLink p = project_scenario(base, changes);
  json j;
  j["base"] = {{"rate_cps", base.rate_cps}, {"snr", base.snr}, {"mu_sat", base.mu_sat}, {"eta_rx", base.eta_rx}};
  j["changes"] = {{"gain_db", changes.diffraction_gain_db},
                  {"eta_rx", changes.eta_rx_new.value_or(base.eta_rx)},
                  {"mu_sat", changes.mu_sat_new.value_or(base.mu_sat)},
                  {"background",
                   changes.background == BackgroundMode::dark_dominated ? "dark_dominated" : "scales_with_eta_rx"}};
  j["rate_cps"] = p.rate_cps;
  j["snr"] = p.snr;
  return j.dump(2);
}

std::string fit_report(const FitResult& fit) {
  json j = fit_json(fit);
  j["peak_center_ps"] = fit.params.peak_time();
  return j.dump(2);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace qlink

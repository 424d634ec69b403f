#include "qlink/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qlink/error.hpp"

namespace qlink {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& pointer, const std::string& what) {
  throw Error(ErrorCode::config_invalid, pointer + ": " + what);
}

/// Reads one object, recording defaults into the normalized copy and
/// rejecting keys nobody asked for.
class SectionReader {
 public:
  SectionReader(const json* src, json& out, std::string pointer) : src_(src), out_(out), pointer_(std::move(pointer)) {
    if (src_ && !src_->is_object()) invalid(pointer_, "expected an object");
    out_ = json::object();
  }

  double number(const char* key, double def) {
    double v = def;
    if (const json* j = find(key)) {
      if (!j->is_number()) invalid(path(key), "expected a number");
      v = j->get<double>();
      if (!std::isfinite(v)) invalid(path(key), "must be finite");
    }
    out_[key] = v;
    return v;
  }

  double positive(const char* key, double def) {
    const double v = number(key, def);
    if (!(v > 0.0)) invalid(path(key), "must be positive");
    return v;
  }

  double nonnegative(const char* key, double def) {
    const double v = number(key, def);
    if (v < 0.0) invalid(path(key), "must be nonnegative");
    return v;
  }

  double unit_interval(const char* key, double def) {
    const double v = number(key, def);
    if (!(v > 0.0 && v <= 1.0)) invalid(path(key), "must be in (0, 1]");
    return v;
  }

  std::uint64_t unsigned_integer(const char* key, std::uint64_t def) {
    std::uint64_t v = def;
    if (const json* j = find(key)) {
      if (!j->is_number_unsigned() && !(j->is_number_integer() && j->get<std::int64_t>() >= 0))
        invalid(path(key), "expected a nonnegative integer");
      v = j->get<std::uint64_t>();
    }
    out_[key] = v;
    return v;
  }

  bool boolean(const char* key, bool def) {
    bool v = def;
    if (const json* j = find(key)) {
      if (!j->is_boolean()) invalid(path(key), "expected true or false");
      v = j->get<bool>();
    }
    out_[key] = v;
    return v;
  }

  std::string string(const char* key, const std::string& def) {
    std::string v = def;
    if (const json* j = find(key)) {
      if (!j->is_string()) invalid(path(key), "expected a string");
      v = j->get<std::string>();
    }
    out_[key] = v;
    return v;
  }

  const json* child(const char* key) { return find(key); }
  json& out() { return out_; }
  std::string path(const char* key) const { return pointer_ + "/" + key; }

  void finish() const {
    if (!src_) return;
    for (const auto& [k, _] : src_->items())
      if (!used_.count(k)) invalid(pointer_ + "/" + k, "unknown key");
  }

 private:
  const json* find(const char* key) {
    used_.insert(key);
    if (!src_) return nullptr;
    auto it = src_->find(key);
    return it == src_->end() ? nullptr : &*it;
  }

  const json* src_;
  json& out_;
  std::string pointer_;
  std::set<std::string> used_;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Parsed {
  RunConfig cfg;
  json normalized;
};

Parsed parse(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::config_invalid, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) invalid("", "config must be a JSON object");

  Parsed p;
  RunConfig& c = p.cfg;
  json& norm = p.normalized;
  norm = json::object();
  static const char* const kSections[] = {"pass", "schedule", "budget", "fading", "detector", "sim", "analysis"};
  for (const auto& [k, _] : doc.items()) {
    bool known = false;
    for (unsigned i = 0; i < std::size(kSections); ++i)
      if (k == kSections[i]) {
        known = true;
        c.sections |= 1u << i;
      }
    if (!known) invalid("/" + k, "unknown section");
  }
  auto section = [&](const char* name) -> const json* {
    auto it = doc.find(name);
    return it == doc.end() ? nullptr : &*it;
  };

  {
    SectionReader r(section("schedule"), norm["schedule"], "/schedule");
    auto& s = c.schedule;
    s.rep_rate_hz = r.positive("rep_rate_hz", s.rep_rate_hz);
    s.slot_length_s = r.positive("slot_length_s", s.slot_length_s);
    s.tx.start_s = r.nonnegative("tx_start_s", s.tx.start_s);
    s.tx.end_s = r.positive("tx_end_s", s.tx.end_s);
    s.rx.start_s = r.nonnegative("rx_start_s", s.rx.start_s);
    s.rx.end_s = r.positive("rx_end_s", s.rx.end_s);
    s.pass_duration_s = r.positive("duration_s", s.pass_duration_s);
    r.finish();
    try {
      s.validate();
    } catch (const Error& e) {
      invalid("/schedule", e.what());
    }
  }

  {
    SectionReader r(section("pass"), norm["pass"], "/pass");
    c.pass_id = r.string("id", c.pass_id);
    const std::string model = r.string("model", "analytic");
    if (model == "analytic") {
      AnalyticFlyby f;
      f.r_min_m = r.positive("r_min_m", f.r_min_m);
      f.v_tangential_mps = r.nonnegative("v_tangential_mps", f.v_tangential_mps);
      f.t_closest_s = r.number("t_closest_s", f.t_closest_s);
      c.pass = PassModel(f);
    } else if (model == "sampled") {
      const std::string rel = r.string("profile_csv", "");
      if (rel.empty()) invalid(r.path("profile_csv"), "required for a sampled pass");
      std::filesystem::path file(rel);
      if (file.is_relative()) file = base_dir / file;
      std::string bytes;
      try {
        bytes = read_file(file);
      } catch (const Error&) {
        invalid(r.path("profile_csv"), "cannot read " + file.string());
      }
      c.pass = PassModel(read_profile_csv(file));
      r.out()["profile_digest"] = fnv1a_hex(bytes);
    } else {
      invalid(r.path("model"), "expected \"analytic\" or \"sampled\"");
    }
    r.finish();
  }

  {
    SectionReader r(section("budget"), norm["budget"], "/budget");
    auto& b = c.budget;
    b.cross_section_m2 = r.positive("cross_section_m2", b.cross_section_m2);
    b.ccr_area_m2 = r.positive("ccr_area_m2", b.ccr_area_m2);
    b.ccr_reflectance = r.unit_interval("ccr_reflectance", b.ccr_reflectance);
    b.effective_ccr_count = r.positive("effective_ccr_count", b.effective_ccr_count);
    b.telescope_area_m2 = r.positive("telescope_area_m2", b.telescope_area_m2);
    b.eta_rx = r.unit_interval("eta_rx", b.eta_rx);
    b.eta_det = r.unit_interval("eta_det", b.eta_det);
    SectionReader a(r.child("atmosphere"), r.out()["atmosphere"], "/budget/atmosphere");
    b.atmosphere.t_zenith = a.unit_interval("t_zenith", b.atmosphere.t_zenith);
    const std::string mode = a.string("mode", "fixed");
    if (mode == "fixed") b.atmosphere.mode = AtmosphereModel::Mode::fixed;
    else if (mode == "zenith_scaled") b.atmosphere.mode = AtmosphereModel::Mode::zenith_scaled;
    else invalid(a.path("mode"), "expected \"fixed\" or \"zenith_scaled\"");
    const double z = a.nonnegative("zenith_angle_deg", 0.0);
    if (z >= 85.0) invalid(a.path("zenith_angle_deg"), "must be below 85 degrees");
    b.atmosphere.zenith_angle_rad = z * kPi / 180.0;
    a.finish();
    r.finish();
  }

  {
    SectionReader r(section("fading"), norm["fading"], "/fading");
    c.fading.ln_mu = r.number("ln_mu", c.fading.ln_mu);
    c.fading.ln_sigma = r.nonnegative("ln_sigma", c.fading.ln_sigma);
    c.fading_correlation_time_s = r.positive("correlation_time_s", c.fading_correlation_time_s);
    r.finish();
  }

  {
    SectionReader r(section("detector"), norm["detector"], "/detector");
    auto& d = c.detector;
    d.sigma_ps = r.positive("sigma_ps", d.sigma_ps);
    d.t0_ps = r.number("t0_ps", d.t0_ps);
    d.t1_ps = r.number("t1_ps", d.t1_ps);
    d.tau_ps = r.positive("tau_ps", d.tau_ps);
    c.source_pulse_fwhm_ps = r.nonnegative("source_pulse_fwhm_ps", c.source_pulse_fwhm_ps);
    c.satellite_spread_fwhm_ps = r.nonnegative("satellite_spread_fwhm_ps", c.satellite_spread_fwhm_ps);
    c.tdc_resolution_ps = r.positive("tdc_resolution_ps", c.tdc_resolution_ps);
    r.finish();
  }

  {
    SectionReader r(section("sim"), norm["sim"], "/sim");
    c.mu_sat = r.nonnegative("mu_sat", c.mu_sat);
    c.dark_rate_hz = r.nonnegative("dark_rate_hz", c.dark_rate_hz);
    c.sky_rate_hz = r.nonnegative("sky_rate_hz", c.sky_rate_hz);
    c.sky_scaled_by_efficiency = r.boolean("sky_scaled_by_efficiency", c.sky_scaled_by_efficiency);
    c.seed = r.unsigned_integer("seed", c.seed);
    r.finish();
  }

  {
    SectionReader r(section("analysis"), norm["analysis"], "/analysis");
    auto& a = c.analysis;
    a.frame_ms = r.positive("frame_ms", a.frame_ms);
    a.filter_ps = r.positive("filter_ps", a.filter_ps);
    a.bin_ps = r.positive("bin_ps", a.bin_ps);
    a.rate_bin_hz = r.positive("rate_bin_hz", a.rate_bin_hz);
    a.arts_threshold = r.nonnegative("arts_threshold", a.arts_threshold);
    a.window_halfspan_ps = static_cast<std::int64_t>(r.unsigned_integer("window_halfspan_ps", 5000));
    r.finish();
    a.validate();
  }

  c.normalized_json = norm.dump();
  json unseeded = norm;
  unseeded["sim"].erase("seed");
  c.digest = fnv1a_hex(unseeded.dump());
  return p;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::require(std::initializer_list<Section> needed) const {
  static const char* const kNames[] = {"pass", "schedule", "budget", "fading", "detector", "sim", "analysis"};
  for (Section s : needed) {
    if (has(s)) continue;
    for (unsigned i = 0; i < std::size(kNames); ++i)
      if (s == (1u << i)) invalid("/" + std::string(kNames[i]), "section is required for this command");
  }
}

SimConfig RunConfig::sim_config() const {
  SimConfig s;
  s.pass = pass;
  s.schedule = schedule;
  s.budget = budget;
  s.fading = fading;
  s.fading_correlation_time_s = fading_correlation_time_s;
  s.detector = detector;
  s.satellite_spread_fwhm_ps = satellite_spread_fwhm_ps;
  s.source_pulse_fwhm_ps = source_pulse_fwhm_ps;
  s.mu_sat = mu_sat;
  s.dark_rate_hz = dark_rate_hz;
  s.sky_rate_hz = sky_rate_hz;
  s.sky_scaled_by_efficiency = sky_scaled_by_efficiency;
  s.tdc_resolution_ps = tdc_resolution_ps;
  s.seed = seed;
  s.pass_id = pass_id;
  s.config_digest = digest;
  return s;
}

RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  return parse(json_text, base_dir).cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

}  // namespace qlink

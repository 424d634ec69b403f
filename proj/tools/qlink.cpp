// qlink: simulate and analyze satellite single-photon downlink passes.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qlink/qlink.h"

namespace {

int report_error(int status) {
  nlohmann::ordered_json j;
  j["error"] = qlink_last_error_reason();
  j["message"] = qlink_last_error();
  std::cerr << j.dump() << "\n";
  return status;
}

int report_error(int status, const std::string& reason, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = reason;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
  return status;
}

struct ConfigHandle {
  qlink_config* p = nullptr;
  ~ConfigHandle() { qlink_config_free(p); }
};
struct StreamHandle {
  qlink_stream* p = nullptr;
  ~StreamHandle() { qlink_stream_free(p); }
};
struct StringHandle {
  char* p = nullptr;
  ~StringHandle() { qlink_string_free(p); }
};

int emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return 0;
  }
  std::ofstream out(path, std::ios::binary);
  out << text << "\n";
  out.close();
  if (!out) return report_error(QLINK_ERR_IO, "IoError", "cannot write " + path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Satellite single-photon downlink simulation and analysis.\n"
               "Exit codes: 0 ok, 2 config/validation, 3 I/O, 4 analysis.\n"
               "QLINK_THREADS caps the worker count."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qlink_version()));

  std::string config_path, out_path, tags_path, report_path, hist_dir, csv_path;
  std::optional<std::uint64_t> seed;
  double range_km = 0.0;

  auto* sim = app.add_subcommand("simulate", "Simulate a pass and write a time-tag CSV plus metadata sidecar");
  sim->add_option("--config", config_path, "Run config JSON")->required();
  sim->add_option("--out", out_path, "Tag CSV to write; metadata goes to <out>.meta.json")->required();
  sim->add_option("--seed", seed, "Override the config seed");

  auto* ana = app.add_subcommand("analyze", "Analyze a time-tag stream and write a JSON report");
  ana->add_option("--tags", tags_path, "Tag CSV")->required();
  ana->add_option("--config", config_path, "Run config JSON describing the same pass")->required();
  ana->add_option("--report", report_path, "Report JSON to write ('-' for stdout)")->required();
  ana->add_option("--hist-dir", hist_dir, "Directory for delta and rate histogram CSVs");

  auto* bud = app.add_subcommand("budget", "Print link-budget intermediates at one range");
  bud->add_option("--config", config_path, "Run config JSON with a budget section")->required();
  bud->add_option("--range-km", range_km, "Slant range in km")->required();

  double gain_db = 0.0;
  std::optional<double> eta_rx, mu_sat;
  std::string background = "dark";
  auto* scn = app.add_subcommand("scenario", "Project a measured link under hardware changes");
  scn->add_option("--report", report_path, "Report JSON from analyze")->required();
  scn->add_option("--gain-db", gain_db, "Extra diffraction gain in dB");
  scn->add_option("--eta-rx", eta_rx, "New receiver efficiency");
  scn->add_option("--mu-sat", mu_sat, "New mean photon number leaving the satellite");
  scn->add_option("--background", background, "dark (unchanged background) or scaled (follows eta_rx)")
      ->check(CLI::IsMember({"dark", "scaled"}));

  auto* fit = app.add_subcommand("fit", "Fit the detector response to a histogram CSV");
  fit->add_option("--hist", csv_path, "Histogram CSV (bin_center_ps,count)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return QLINK_ERR_VALIDATION;
  }

  if (*sim) {
    ConfigHandle cfg;
    if (int s = qlink_config_load(config_path.c_str(), &cfg.p)) return report_error(s);
    if (seed) qlink_config_set_seed(cfg.p, *seed);
    StreamHandle stream;
    if (int s = qlink_simulate(cfg.p, &stream.p)) return report_error(s);
    if (int s = qlink_stream_write(stream.p, out_path.c_str())) return report_error(s);
    return 0;
  }

  if (*ana) {
    ConfigHandle cfg;
    if (int s = qlink_config_load(config_path.c_str(), &cfg.p)) return report_error(s);
    StreamHandle stream;
    if (int s = qlink_stream_read(tags_path.c_str(), &stream.p)) return report_error(s);
    StringHandle report;
    if (int s = qlink_analyze(cfg.p, stream.p, hist_dir.empty() ? nullptr : hist_dir.c_str(), &report.p))
      return report_error(s);
    return emit(report.p, report_path);
  }

  if (*bud) {
    ConfigHandle cfg;
    if (int s = qlink_config_load(config_path.c_str(), &cfg.p)) return report_error(s);
    StringHandle out;
    if (int s = qlink_budget(cfg.p, range_km * 1e3, &out.p)) return report_error(s);
    return emit(out.p, "");
  }

  if (*scn) {
    std::ifstream in(report_path, std::ios::binary);
    if (!in) return report_error(QLINK_ERR_IO, "IoError", "cannot open " + report_path);
    std::stringstream ss;
    ss << in.rdbuf();
    if (eta_rx && !(*eta_rx > 0.0 && *eta_rx <= 1.0))
      return report_error(QLINK_ERR_VALIDATION, "InvalidScenario", "--eta-rx must be in (0, 1]");
    qlink_scenario changes{gain_db, eta_rx.value_or(0.0), mu_sat.value_or(std::numeric_limits<double>::quiet_NaN()),
                           background == "dark" ? 0 : 1};
    StringHandle out;
    if (int s = qlink_scenario_project(ss.str().c_str(), &changes, &out.p)) return report_error(s);
    return emit(out.p, "");
  }

  if (*fit) {
    StringHandle out;
    if (int s = qlink_fit_histogram(csv_path.c_str(), &out.p)) return report_error(s);
    return emit(out.p, "");
  }
  return 0;
}

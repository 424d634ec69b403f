#include "qlink/qlink.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "qlink/config.hpp"
#include "qlink/error.hpp"
#include "qlink/report.hpp"
#include "qlink/timetag_sim.hpp"

struct qlink_config {
  qlink::RunConfig cfg;
};

struct qlink_stream {
  qlink::TimeTagStream stream;
};

namespace {

thread_local std::string g_message;
thread_local std::string g_reason;

qlink_status fail(qlink_status status, std::string reason, std::string message) {
  g_reason = std::move(reason);
  g_message = std::move(message);
  return status;
}

template <class F>
qlink_status guarded(F&& body) {
  g_message.clear();
  g_reason.clear();
  try {
    body();
    return QLINK_OK;
  } catch (const qlink::Error& e) {
    return fail(static_cast<qlink_status>(static_cast<int>(e.category())), std::string(e.reason()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(QLINK_ERR_ANALYSIS, "OutOfMemory", "out of memory");
  } catch (const std::exception& e) {
    return fail(QLINK_ERR_ANALYSIS, "Internal", e.what());
  }
}

char* copy_out(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void require_arg(const void* p, const char* name) {
  if (!p) throw qlink::Error(qlink::ErrorCode::domain_error, std::string(name) + " must not be null");
}

}  // namespace

extern "C" {

const char* qlink_last_error(void) { return g_message.c_str(); }
const char* qlink_last_error_reason(void) { return g_reason.c_str(); }
const char* qlink_version(void) { return "1.0.0"; }

qlink_status qlink_config_load(const char* path, qlink_config** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new qlink_config{qlink::load_config(path)};
  });
}

qlink_status qlink_config_parse(const char* json_text, const char* base_dir, qlink_config** out) {
  return guarded([&] {
    require_arg(json_text, "json_text");
    require_arg(out, "out");
    *out = new qlink_config{qlink::parse_config(json_text, base_dir ? base_dir : "")};
  });
}

void qlink_config_free(qlink_config* cfg) { delete cfg; }

qlink_status qlink_config_set_seed(qlink_config* cfg, uint64_t seed) {
  return guarded([&] {
    require_arg(cfg, "cfg");
    cfg->cfg.seed = seed;
  });
}

const char* qlink_config_digest(const qlink_config* cfg) { return cfg ? cfg->cfg.digest.c_str() : ""; }

qlink_status qlink_simulate(const qlink_config* cfg, qlink_stream** out) {
  return guarded([&] {
    require_arg(cfg, "cfg");
    require_arg(out, "out");
    cfg->cfg.require({qlink::RunConfig::kPass});
    *out = new qlink_stream{qlink::simulate(cfg->cfg.sim_config())};
  });
}

qlink_status qlink_stream_read(const char* path, qlink_stream** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new qlink_stream{qlink::read_tags(path)};
  });
}

qlink_status qlink_stream_write(const qlink_stream* stream, const char* path) {
  return guarded([&] {
    require_arg(stream, "stream");
    require_arg(path, "path");
    qlink::write_tags(stream->stream, path);
  });
}

size_t qlink_stream_size(const qlink_stream* stream) { return stream ? stream->stream.tags.size() : 0; }

qlink_status qlink_stream_get(const qlink_stream* stream, size_t index, qlink_tag* out) {
  return guarded([&] {
    require_arg(stream, "stream");
    require_arg(out, "out");
    if (index >= stream->stream.tags.size()) throw qlink::Error(qlink::ErrorCode::invalid_range, "tag index out of range");
    const auto& t = stream->stream.tags[index];
    out->time_ps = t.time_ps;
    out->channel = static_cast<int>(t.channel);
  });
}

void qlink_stream_free(qlink_stream* stream) { delete stream; }

qlink_status qlink_analyze(const qlink_config* cfg, const qlink_stream* stream, const char* hist_dir,
                           char** report_json) {
  return guarded([&] {
    require_arg(cfg, "cfg");
    require_arg(stream, "stream");
    require_arg(report_json, "report_json");
    const auto& c = cfg->cfg;
    c.require({qlink::RunConfig::kPass});
    const qlink::ArrivalTimeline timeline(c.pass, c.schedule);
    const auto result = qlink::analyze(stream->stream, timeline, c.budget, c.analysis);
    if (hist_dir) qlink::write_analysis_histograms(result, hist_dir);
    *report_json = copy_out(qlink::analysis_report(result, c, stream->stream.meta, qlink::utc_timestamp()));
  });
}

qlink_status qlink_budget(const qlink_config* cfg, double range_m, char** out_json) {
  return guarded([&] {
    require_arg(cfg, "cfg");
    require_arg(out_json, "out_json");
    cfg->cfg.require({qlink::RunConfig::kBudget});
    *out_json = copy_out(qlink::budget_report(cfg->cfg.budget, range_m));
  });
}

qlink_status qlink_scenario_project(const char* report_json, const qlink_scenario* changes, char** out_json) {
  return guarded([&] {
    require_arg(report_json, "report_json");
    require_arg(changes, "changes");
    require_arg(out_json, "out_json");
    const auto base = qlink::summary_from_report(report_json);
    qlink::ScenarioChanges c;
    c.diffraction_gain_db = changes->gain_db;
    if (changes->eta_rx > 0.0) c.eta_rx_new = changes->eta_rx;
    if (!std::isnan(changes->mu_sat)) c.mu_sat_new = changes->mu_sat;
    if (changes->background != 0 && changes->background != 1)
      throw qlink::Error(qlink::ErrorCode::invalid_scenario, "background must be 0 or 1");
    c.background = changes->background == 0 ? qlink::BackgroundMode::dark_dominated
                                             : qlink::BackgroundMode::scales_with_eta_rx;
    *out_json = copy_out(qlink::scenario_report(base, c));
  });
}

qlink_status qlink_fit_histogram(const char* csv_path, char** out_json) {
  return guarded([&] {
    require_arg(csv_path, "csv_path");
    require_arg(out_json, "out_json");
    const auto hist = qlink::read_histogram_csv(csv_path);
    *out_json = copy_out(qlink::fit_report(qlink::fit_response(hist)));
  });
}

void qlink_string_free(char* s) { std::free(s); }

}  // extern "C"

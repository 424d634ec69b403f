#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "qlink/analysis.hpp"
#include "qlink/config.hpp"

namespace qlink {

/// Link-budget intermediates at one range, as a JSON object.
std::string budget_report(const BudgetParams& budget, double range_m);

/// Full analysis report. `generated_at` is the only run-dependent field.
std::string analysis_report(const AnalysisResult& result, const RunConfig& config, const StreamMetadata& meta,
                            std::string_view generated_at);

/// Writes delta_histogram.csv and rate_histogram.csv into dir.
void write_analysis_histograms(const AnalysisResult& result, const std::filesystem::path& dir);

/// Summary block (ARTS-kept rate and SNR, mean mu_sat, eta_rx) of a report.
PassSummary summary_from_report(std::string_view report_json);

std::string scenario_report(const PassSummary& base, const ScenarioChanges& changes);

std::string fit_report(const FitResult& fit);

/// Current UTC time, ISO 8601 with seconds.
std::string utc_timestamp();

}  // namespace qlink

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace qlink {

/// Uniformly binned counts. Counts are real-valued so that model curves and
/// re-ingested CSVs share the type.
struct Histogram {
  double bin_width = 0.0;
  std::vector<double> centers;
  std::vector<double> counts;

  std::size_t size() const { return counts.size(); }
  double total() const;
  void validate() const;
};

struct BinnedValues {
  Histogram histogram;
  std::size_t dropped = 0;  // values outside [lo, hi)
};

/// Bins values into [lo, hi) with the given width; the last bin may extend
/// past hi when the range is not a whole number of bins.
BinnedValues build_histogram(std::span<const double> values, double bin_width, double lo, double hi);

/// CSV with header `<center_column>,count`.
void write_histogram_csv(const Histogram& h, const std::filesystem::path& path,
                         std::string_view center_column = "bin_center_ps");
/// Accepts `bin_center_ps,count` or `bin_center_hz,count`; bins must be uniform.
Histogram read_histogram_csv(const std::filesystem::path& path);

}  // namespace qlink

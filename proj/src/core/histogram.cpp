#include "qlink/histogram.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "csv_util.hpp"
#include "qlink/error.hpp"
#include "qlink/parallel.hpp"

namespace qlink {

double Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

void Histogram::validate() const {
  if (!(bin_width > 0.0)) throw Error(ErrorCode::invalid_range, "histogram bin width must be positive");
  if (centers.size() != counts.size())
    throw Error(ErrorCode::invalid_range, "histogram centers and counts differ in length");
  for (double c : counts)
    if (!(c >= 0.0)) throw Error(ErrorCode::invalid_range, "histogram counts must be nonnegative");
}

BinnedValues build_histogram(std::span<const double> values, double bin_width, double lo, double hi) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width))
    throw Error(ErrorCode::invalid_range, "bin width must be positive");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw Error(ErrorCode::invalid_range, "histogram range must satisfy lo < hi");

  const double ratio = (hi - lo) / bin_width;
  const auto bins = static_cast<std::size_t>(std::ceil(ratio - 1e-9 * ratio));
  BinnedValues out;
  out.histogram.bin_width = bin_width;
  out.histogram.centers.resize(bins);
  for (std::size_t i = 0; i < bins; ++i)
    out.histogram.centers[i] = lo + (static_cast<double>(i) + 0.5) * bin_width;

  // Per-worker partial counts, merged in chunk order.
  constexpr std::size_t kChunk = 1 << 16;
  const std::size_t chunks = (values.size() + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(bins, 0.0));
  std::vector<std::size_t> dropped(chunks, 0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(values.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double v = values[i];
      if (!(v >= lo && v < hi)) {
        ++dropped[c];
        continue;
      }
      auto b = static_cast<std::size_t>(std::floor((v - lo) / bin_width));
      if (b >= bins) b = bins - 1;
      partial[c][b] += 1.0;
    }
  });
  out.histogram.counts.assign(bins, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t b = 0; b < bins; ++b) out.histogram.counts[b] += partial[c][b];
    out.dropped += dropped[c];
  }
  return out;
}

void write_histogram_csv(const Histogram& h, const std::filesystem::path& path, std::string_view center_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << center_column << ",count\n";
  for (std::size_t i = 0; i < h.size(); ++i)
    out << csv::format_double(h.centers[i]) << ',' << csv::format_double(h.counts[i]) << '\n';
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

Histogram read_histogram_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  Histogram h;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::format_error, path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = csv::strip_cr(line);
    if (line_no == 1) {
      if (text != "bin_center_ps,count" && text != "bin_center_hz,count")
        fail("expected header 'bin_center_ps,count'");
      continue;
    }
    if (text.empty()) continue;
    const auto fields = csv::split(text);
    double center = 0, count = 0;
    if (fields.size() != 2 || !csv::parse_double(fields[0], center) || !csv::parse_double(fields[1], count))
      fail("malformed row");
    if (count < 0) fail("negative count");
    h.centers.push_back(center);
    h.counts.push_back(count);
  }
  if (line_no == 0) throw Error(ErrorCode::format_error, path.string() + ": empty file");
  if (h.centers.size() >= 2) {
    h.bin_width = h.centers[1] - h.centers[0];
    if (!(h.bin_width > 0)) throw Error(ErrorCode::format_error, path.string() + ": bin centers must increase");
    for (std::size_t i = 2; i < h.centers.size(); ++i) {
      const double w = h.centers[i] - h.centers[i - 1];
      if (std::fabs(w - h.bin_width) > 1e-9 * std::max(1.0, std::fabs(h.centers[i])))
        throw Error(ErrorCode::format_error,
                    path.string() + ":" + std::to_string(i + 2) + ": non-uniform bin width");
    }
  } else {
    throw Error(ErrorCode::format_error, path.string() + ": need at least two bins to infer the bin width");
  }
  return h;
}

}  // namespace qlink

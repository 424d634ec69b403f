#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qlink {

enum class Channel : std::uint8_t { marker = 0, detector = 1 };

struct TimeTag {
  std::int64_t time_ps;
  Channel channel = Channel::detector;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

struct StreamMetadata {
  std::string config_digest;
  std::string pass_id;
  double duration_s = 0.0;
  std::optional<std::uint64_t> seed;
  /// Pulse-weighted mean of the fading multiplier over pulses arriving
  /// in rx windows (simulation diagnostic).
  std::optional<double> realized_fading_mean;

  friend bool operator==(const StreamMetadata&, const StreamMetadata&) = default;
};

/// Time-sorted detection events in integer picoseconds from pass start.
struct TimeTagStream {
  std::vector<TimeTag> tags;
  StreamMetadata meta;

  friend bool operator==(const TimeTagStream&, const TimeTagStream&) = default;
};

std::filesystem::path metadata_path(const std::filesystem::path& tags_path);

/// Writes `time_ps,channel` CSV (ASCII, LF) plus `<path>.meta.json`.
void write_tags(const TimeTagStream& stream, const std::filesystem::path& path);

/// Reads a tag CSV; the metadata sidecar is optional. Rejects unsorted
/// times and malformed rows with the offending line number.
TimeTagStream read_tags(const std::filesystem::path& path);

}  // namespace qlink

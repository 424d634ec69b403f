#include "qlink/timetag.hpp"

#include <charconv>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "csv_util.hpp"
#include "qlink/error.hpp"

namespace qlink {

std::filesystem::path metadata_path(const std::filesystem::path& tags_path) {
  return std::filesystem::path(tags_path.string() + ".meta.json");
}

void write_tags(const TimeTagStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  std::string buffer = "time_ps,channel\n";
  buffer.reserve(buffer.size() + stream.tags.size() * 20);
  char num[32];
  for (const auto& tag : stream.tags) {
    auto [end, ec] = std::to_chars(num, num + sizeof(num), tag.time_ps);
    buffer.append(num, end);
    buffer.push_back(',');
    buffer.push_back(static_cast<char>('0' + static_cast<int>(tag.channel)));
    buffer.push_back('\n');
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());

  nlohmann::ordered_json meta;
  meta["config_digest"] = stream.meta.config_digest;
  meta["pass_id"] = stream.meta.pass_id;
  meta["duration_s"] = stream.meta.duration_s;
  meta["tag_count"] = stream.tags.size();
  if (stream.meta.seed) meta["seed"] = *stream.meta.seed;
  if (stream.meta.realized_fading_mean) meta["realized_fading_mean"] = *stream.meta.realized_fading_mean;
  std::ofstream meta_out(metadata_path(path), std::ios::binary);
  if (!meta_out) throw Error(ErrorCode::io_error, "cannot write " + metadata_path(path).string());
  meta_out << meta.dump(2) << '\n';
  if (!meta_out) throw Error(ErrorCode::io_error, "write failed for " + metadata_path(path).string());
}

TimeTagStream read_tags(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::stringstream content;
  content << in.rdbuf();
  const std::string text = content.str();

  TimeTagStream stream;
  std::size_t pos = 0, line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::format_error, path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (pos < text.size()) {
    const auto eol = text.find('\n', pos);
    const auto end = eol == std::string::npos ? text.size() : eol;
    const std::string_view line = csv::strip_cr(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != "time_ps,channel") fail("expected header 'time_ps,channel'");
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) fail("expected two fields");
    std::int64_t time = 0, channel = 0;
    if (!csv::parse_int(line.substr(0, comma), time)) fail("malformed time_ps");
    if (!csv::parse_int(line.substr(comma + 1), channel) || channel < 0 || channel > 1)
      fail("channel must be 0 (marker) or 1 (detector)");
    if (!stream.tags.empty() && time < stream.tags.back().time_ps) fail("time_ps decreases (stream must be sorted)");
    stream.tags.push_back({time, static_cast<Channel>(channel)});
  }
  if (line_no == 0) throw Error(ErrorCode::format_error, path.string() + ":1: missing header");

  const auto meta_file = metadata_path(path);
  if (std::filesystem::exists(meta_file)) {
    std::ifstream meta_in(meta_file, std::ios::binary);
    nlohmann::json meta;
    try {
      meta_in >> meta;
      stream.meta.config_digest = meta.value("config_digest", "");
      stream.meta.pass_id = meta.value("pass_id", "");
      stream.meta.duration_s = meta.value("duration_s", 0.0);
      if (meta.contains("seed")) stream.meta.seed = meta.at("seed").get<std::uint64_t>();
      if (meta.contains("realized_fading_mean"))
        stream.meta.realized_fading_mean = meta.at("realized_fading_mean").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::format_error, meta_file.string() + ": " + e.what());
    }
  }
  return stream;
}

}  // namespace qlink

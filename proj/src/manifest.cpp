#include "stripescan/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>
#include <tuple>

#include "stripescan/error.hpp"
#include "stripescan/io_util.hpp"

namespace stripescan {

namespace {

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kParseError, "invalid " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "True" || text == "TRUE") return true;
  if (text == "false" || text == "0" || text == "False" || text == "FALSE" || text.empty()) return false;
  throw Error(ErrorCode::kParseError, "invalid boolean '" + text + "'");
}

}  // namespace

std::vector<RowInterval> normalize_intervals(std::vector<RowInterval> intervals) {
  std::erase_if(intervals, [](const RowInterval& iv) { return iv.end <= iv.start; });
  std::sort(intervals.begin(), intervals.end(),
            [](const RowInterval& a, const RowInterval& b) { return std::tie(a.start, a.end) < std::tie(b.start, b.end); });
  std::vector<RowInterval> merged;
  for (const auto& iv : intervals) {
    if (!merged.empty() && iv.start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, iv.end);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

int covered_rows(const std::vector<RowInterval>& intervals, int start, int end) {
  int total = 0;
  for (const auto& iv : normalize_intervals(intervals)) {
    total += std::max(0, std::min(iv.end, end) - std::max(iv.start, start));
  }
  return total;
}

std::string format_intervals(const std::vector<RowInterval>& intervals) {
  std::string out;
  for (const auto& iv : intervals) {
    if (!out.empty()) out.push_back(';');
    out += std::to_string(iv.start) + "-" + std::to_string(iv.end);
  }
  return out;
}

std::vector<RowInterval> parse_intervals(const std::string& text) {
  std::vector<RowInterval> out;
  if (text.empty()) return out;
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto semi = rest.find(';');
    const auto token = rest.substr(0, semi);
    const auto dash = token.find('-');
    if (dash == std::string_view::npos) {
      throw Error(ErrorCode::kParseError, "interval '" + std::string(token) + "' is not start-end");
    }
    RowInterval iv{parse_int(token.substr(0, dash), "interval start"), parse_int(token.substr(dash + 1), "interval end")};
    if (iv.start < 0 || iv.end <= iv.start) {
      throw Error(ErrorCode::kParseError, "empty or negative interval '" + std::string(token) + "'");
    }
    out.push_back(iv);
    if (semi == std::string_view::npos) break;
    rest.remove_prefix(semi + 1);
  }
  return out;
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
  if (entry.path.is_absolute() || base_dir.empty()) return entry.path;
  return base_dir / entry.path;
}

void validate_entry(const ManifestEntry& entry, int image_height) {
  if (entry.patient_id.empty() || entry.sequence_id.empty() || entry.image_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "manifest identifiers must be non-empty (" + entry.path.string() + ")");
  }
  auto sorted = entry.artifact_intervals;
  std::sort(sorted.begin(), sorted.end(), [](const RowInterval& a, const RowInterval& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& iv = sorted[i];
    if (iv.start < 0 || iv.end <= iv.start) throw Error(ErrorCode::kInvalidArgument, "empty artifact interval");
    if (image_height >= 0 && iv.end > image_height) {
      throw Error(ErrorCode::kInvalidArgument, "artifact interval " + format_intervals({iv}) +
                                                   " exceeds image height " + std::to_string(image_height));
    }
    if (i > 0 && iv.start < sorted[i - 1].end) {
      throw Error(ErrorCode::kInvalidArgument, "overlapping artifact intervals for image " + entry.image_id);
    }
  }
}

DatasetManifest parse_manifest(const std::string& csv_text, const std::filesystem::path& base_dir) {
  DatasetManifest manifest;
  manifest.base_dir = base_dir;
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) throw Error(ErrorCode::kParseError, "unexpected manifest header: " + line);

  std::set<std::tuple<std::string, std::string, std::string>> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 7) {
      throw Error(ErrorCode::kParseError, "manifest line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                              std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.path = fields[0];
    e.patient_id = fields[1];
    e.sequence_id = fields[2];
    e.image_id = fields[3];
    e.artifact_intervals = parse_intervals(fields[4]);
    e.excluded = parse_bool(fields[5]);
    e.reason = fields[6];
    validate_entry(e);
    if (!seen.emplace(e.patient_id, e.sequence_id, e.image_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate identifiers at manifest line " + std::to_string(line_no));
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text_file(path), path.parent_path());
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& e : manifest.entries) {
    out += csv_escape(e.path.generic_string()) + "," + csv_escape(e.patient_id) + "," + csv_escape(e.sequence_id) + "," +
           csv_escape(e.image_id) + "," + format_intervals(e.artifact_intervals) + "," +
           (e.excluded ? "true" : "false") + "," + csv_escape(e.reason) + "\n";
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  write_file_atomic(path, format_manifest(manifest));
}

}  // namespace stripescan

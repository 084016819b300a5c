#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace stripescan {

// Half-open row range [start, end).
struct RowInterval {
  int start = 0;
  int end = 0;

  int length() const noexcept { return end - start; }
  bool operator==(const RowInterval&) const = default;
};

// Sorts and merges overlapping or touching intervals; drops empty ones.
std::vector<RowInterval> normalize_intervals(std::vector<RowInterval> intervals);

// Number of rows of [start, end) covered by the union of `intervals`.
int covered_rows(const std::vector<RowInterval>& intervals, int start, int end);

std::string format_intervals(const std::vector<RowInterval>& intervals);
std::vector<RowInterval> parse_intervals(const std::string& text);

struct ManifestEntry {
  std::filesystem::path path;
  std::string patient_id;
  std::string sequence_id;
  std::string image_id;
  std::vector<RowInterval> artifact_intervals;
  bool excluded = false;
  std::string reason;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  // Relative image paths are resolved against this directory.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& entry) const;
};

inline constexpr const char* kManifestHeader =
    "path,patient_id,sequence_id,image_id,artifact_intervals,excluded,reason";

// Throws kParseError on malformed rows, kInvalidArgument on duplicate or
// empty identifiers and on intervals that overlap after parsing.
DatasetManifest parse_manifest(const std::string& csv_text, const std::filesystem::path& base_dir = {});
DatasetManifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Checks identifier uniqueness and interval sanity; `image_height` < 0 skips
// the upper-bound check.
void validate_entry(const ManifestEntry& entry, int image_height = -1);

}  // namespace stripescan

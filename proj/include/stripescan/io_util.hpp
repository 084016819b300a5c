#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stripescan {

// Writes through a sibling temp file and renames it into place so readers
// never observe a partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_text_file(const std::filesystem::path& path);

// Minimal RFC 4180 CSV: quoted fields may contain separators, quotes are
// doubled. Enough for manifests and feature tables.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

// Shortest representation that parses back to the identical double.
std::string format_double(double value);

}  // namespace stripescan

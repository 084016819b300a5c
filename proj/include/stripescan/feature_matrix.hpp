#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stripescan/features.hpp"
#include "stripescan/imagecore.hpp"

namespace stripescan {

struct Provenance {
  std::string patient_id;
  std::string sequence_id;
  std::string image_id;
  int row_start = 0;

  auto operator<=>(const Provenance&) const = default;
};

struct FeatureRow {
  Provenance provenance;
  Label label = Label::kClean;
  std::vector<double> values;

  bool operator==(const FeatureRow&) const = default;
};

// Rows of fixed-length feature vectors with labels and grouping keys.
struct FeatureMatrix {
  FeatureKind kind = FeatureKind::kCorrAngle;
  std::vector<FeatureRow> rows;
  // Set by apply_standardizer; the SVM trainer refuses unstandardized input.
  bool standardized = false;

  std::size_t dimension() const { return rows.empty() ? 0 : rows.front().values.size(); }
  std::size_t count(Label label) const;
  FeatureMatrix subset(const std::vector<std::size_t>& indices) const;
  // Throws kDimensionMismatch when rows disagree in length.
  void check_rectangular() const;
};

// Group key at image level: patient/sequence/image joined with '/'.
std::string image_key(const Provenance& p);

// CSV header: patient_id,sequence_id,image_id,row_start,label,f0..f{n-1};
// label is 0 (clean) or 1 (artifact). Values use shortest round-trip form.
std::string format_feature_csv(const FeatureMatrix& m);
FeatureMatrix parse_feature_csv(const std::string& text, FeatureKind kind);
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m);

// Sidecar `{features}.meta.json` with the kind and the configuration snapshot.
struct FeatureMeta {
  FeatureKind kind = FeatureKind::kCorrAngle;
  HogConfig hog;
  CorrAngleConfig corr;
  SliceParams slices;
  int dimension = 0;
};

nlohmann::json to_json(const HogConfig& cfg);
nlohmann::json to_json(const CorrAngleConfig& cfg);
nlohmann::json to_json(const FeatureMeta& meta);
FeatureMeta feature_meta_from_json(const nlohmann::json& j);

std::filesystem::path meta_path_for(const std::filesystem::path& features_csv);
void write_feature_meta(const std::filesystem::path& features_csv, const FeatureMeta& meta);
FeatureMeta read_feature_meta(const std::filesystem::path& features_csv);

// Reads the CSV, taking the kind from the sidecar when present.
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

}  // namespace stripescan

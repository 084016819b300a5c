#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stripescan/classify.hpp"
#include "stripescan/config.hpp"
#include "stripescan/eval.hpp"
#include "stripescan/feature_matrix.hpp"
#include "stripescan/manifest.hpp"

namespace stripescan {

// Feature vector of one slice for the given kind (hog36 statistics or the
// corrAngle sequence).
std::vector<double> slice_features(const GrayImage& slice, FeatureKind kind, const PipelineConfig& cfg);

struct PreparedImage {
  FovMask fov;
  double snr = 0.0;
  GrayImage compressed;
};

// FOV detection and SNR on raw intensities, then quantile compression.
PreparedImage prepare_image(const GrayImage& raw, const PipelineConfig& cfg);

struct ImageOutcome {
  std::string image_id;
  std::string status;  // "ok", "excluded" or "failed"
  std::string reason;
  double snr = 0.0;
  int slices = 0;
};

struct FeatureRun {
  FeatureMatrix matrix;
  std::vector<ImageOutcome> outcomes;  // manifest order

  int count(std::string_view status) const;
};

// Exclusion -> compression -> FOV -> slices -> features, per image in
// parallel. Per-image failures are recorded and skipped.
FeatureRun run_features(const DatasetManifest& manifest, FeatureKind kind, const PipelineConfig& cfg);

FeatureMeta feature_meta(FeatureKind kind, const PipelineConfig& cfg, int dimension);

struct FoldReport {
  int fold = 0;
  std::vector<std::string> test_groups;
  std::size_t train_rows = 0;  // after undersampling
  std::size_t train_artifact = 0;
  std::size_t train_clean = 0;
  std::size_t test_rows = 0;
  std::size_t leakage = 0;        // group keys shared by train and test
  std::size_t image_leakage = 0;  // image keys shared by train and test
  std::optional<double> auc;
  std::string warning;
  std::optional<TrainedModel> model;
  std::vector<std::size_t> test_indices;
  std::vector<double> scores;
};

struct CvReport {
  FeatureKind feature_kind = FeatureKind::kCorrAngle;
  ModelKind model_kind = ModelKind::kRandomForest;
  FoldAssignment folds;
  std::vector<FoldReport> fold_reports;
  FoldAggregate aggregate;
  VerticalAverage vertical;
  std::vector<double> scores;  // per matrix row, from the fold that tested it
  std::size_t leakage_total = 0;
  std::vector<std::string> warnings;
};

// Per fold: undersample train -> standardize (SVM, or forest when enabled)
// -> train -> score test; then aggregate.
CvReport train_eval(const FeatureMatrix& m, ModelKind kind, const PipelineConfig& cfg);

nlohmann::json summary_json(const CvReport& report, const PipelineConfig& cfg);

// fold_{i}.model.json, scores.csv, roc.csv, roc_vertical.csv, summary.json,
// roc.svg and resolved-config.json.
void write_cv_outputs(const CvReport& report, const FeatureMatrix& m, const PipelineConfig& cfg,
                      const std::filesystem::path& dir);

struct ScoreRow {
  Provenance provenance;
  Label label = Label::kClean;
  double score = 0.0;
};

// CSV `patient_id,sequence_id,image_id,row_start,label,score`.
std::string format_score_csv(const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> parse_score_csv(const std::string& text);
std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path);

struct SlicePrediction {
  int row_start = 0;
  int row_end = 0;
  double score = 0.0;
  Label predicted = Label::kClean;
};

struct ImagePrediction {
  double snr = 0.0;
  bool low_snr = false;
  std::vector<SlicePrediction> slices;
};

// Throws kDimensionMismatch when `expected_kind` is given and differs from
// the model's feature kind.
ImagePrediction predict_image(const TrainedModel& model, const GrayImage& raw, const PipelineConfig& cfg,
                              std::optional<FeatureKind> expected_kind = std::nullopt);

nlohmann::json to_json(const ImagePrediction& p);

}  // namespace stripescan

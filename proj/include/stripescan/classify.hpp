#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stripescan/feature_matrix.hpp"

namespace stripescan {

struct ForestConfig {
  int n_trees = 200;
  int max_depth = 12;
  int min_leaf = 2;
  int features_per_split = 0;  // 0 = ceil(sqrt(d))
  bool bootstrap = true;

  bool operator==(const ForestConfig&) const = default;
};

struct SvmConfig {
  double c = 1.0;
  int epochs = 50;
  double tolerance = 1e-6;
  int batch_size = 0;  // 0 = full batch

  bool operator==(const SvmConfig&) const = default;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  ForestConfig rf;
  SvmConfig svm;
  // Standardize inputs for the forest too (the SVM is always standardized).
  bool standardize_forest = false;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Uniformly drops majority-class rows (without replacement) down to the
// minority count, then shuffles; both steps seeded.
FeatureMatrix undersample(const FeatureMatrix& m, std::uint64_t seed);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // 0 marks a constant feature, mapped to 0

  std::vector<double> apply(std::span<const double> x) const;
  bool operator==(const Standardizer&) const = default;
};

// Population statistics over the training rows; needs at least two rows.
Standardizer fit_standardizer(const FeatureMatrix& train);
FeatureMatrix apply_standardizer(const Standardizer& state, const FeatureMatrix& m);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // x[feature] <= threshold
  int right = -1;
  double artifact_fraction = 0.0;

  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double leaf_fraction(std::span<const double> x) const;
  int depth() const;
  bool operator==(const DecisionTree&) const = default;
};

// One CART tree on the given rows: Gini decrease, midpoint thresholds, ties
// to the lowest feature index then the lowest threshold.
DecisionTree grow_tree(const FeatureMatrix& m, const std::vector<std::size_t>& rows, const ForestConfig& cfg,
                       std::uint64_t seed);

struct LinearSvm {
  std::vector<double> weights;
  double bias = 0.0;
  // Objective of the retained iterate at each epoch checkpoint.
  std::vector<double> objective_trace;

  bool operator==(const LinearSvm&) const = default;
};

// (1/2)|w|^2 + C * sum(hinge(y * (w.x + b))) with y in {-1, +1}.
double svm_objective(const FeatureMatrix& m, std::span<const double> w, double bias, double c);

enum class ModelKind { kRandomForest, kLinearSvm };
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct TrainedModel {
  ModelKind kind = ModelKind::kRandomForest;
  FeatureKind feature_kind = FeatureKind::kCorrAngle;
  std::size_t dimension = 0;
  TrainConfig config;
  std::vector<DecisionTree> forest;
  LinearSvm svm;
  std::optional<Standardizer> standardizer;
  double class_prior = 0.5;  // artifact share of the training rows

  bool operator==(const TrainedModel&) const = default;
};

TrainedModel train_random_forest(const FeatureMatrix& m, const TrainConfig& cfg);

// `standardized` must come from apply_standardizer(state, ...).
TrainedModel train_linear_svm(const FeatureMatrix& standardized, const Standardizer& state, const TrainConfig& cfg);

// Forest: share of trees voting artifact (a tree whose leaf is exactly
// balanced casts half a vote). SVM: signed margin w.x + b on standardized
// input. Higher is more artifact-like.
std::vector<double> predict_score(const TrainedModel& model, const FeatureMatrix& m);
double predict_score(const TrainedModel& model, std::span<const double> x);

// Decision threshold used for hard labels: 0.5 for forests, 0 for SVMs.
double decision_threshold(ModelKind kind);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Versioned JSON ({"format":"stripescan-model","version":1,...}).
nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
std::string serialize_model(const TrainedModel& model);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace stripescan

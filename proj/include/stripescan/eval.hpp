#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stripescan/imagecore.hpp"

namespace stripescan {

enum class GroupLevel { kImage, kPatient };
std::string_view to_string(GroupLevel level);

struct FoldAssignment {
  std::map<std::string, int> fold_of_group;
  int k = 0;
  GroupLevel group_level = GroupLevel::kImage;

  int fold_of(const std::string& group) const;
  std::vector<std::string> groups_in(int fold) const;
};

// Distinct groups (in sorted order) are shuffled with the seed and dealt
// round-robin into k folds.
FoldAssignment grouped_kfold(const std::vector<std::string>& groups, int k, std::uint64_t seed);

// One fold per distinct patient, folds numbered in sorted patient order.
FoldAssignment leave_one_patient_out(const std::vector<std::string>& patients);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // score >= threshold counts as artifact; +inf for (0,0)
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// One point per distinct score, swept from the highest; trapezoidal area.
RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels);

struct FoldScores {
  std::vector<double> scores;
  std::vector<Label> labels;
};

struct FoldAggregate {
  RocCurve pooled;
  std::vector<std::optional<double>> fold_auc;  // nullopt for single-class folds
  std::vector<int> skipped_folds;
  double mean_auc = 0.0;
  double std_auc = 0.0;  // sample stddev over valid folds; 0 with one fold
};

// Pooled curve over the concatenation plus per-fold AUCs. Throws
// kNoValidFold when no fold holds both classes.
FoldAggregate aggregate_folds(const std::vector<FoldScores>& folds);

struct VerticalAverage {
  std::vector<double> fpr;
  std::vector<double> tpr_mean;
  std::vector<double> tpr_std;
};

// Mean TPR of the step curves at fixed FPR positions (0, 1/(n-1), ..., 1).
VerticalAverage vertical_average(const std::vector<RocCurve>& curves, int n_points = 101);

// TPR of a step ROC curve at a given FPR (the highest TPR reached at or
// before it).
double tpr_at(const RocCurve& curve, double fpr);

std::string format_roc_csv(const RocCurve& curve);
std::string format_vertical_csv(const VerticalAverage& avg);

struct NamedCurve {
  std::string name;
  RocCurve curve;
};

std::string render_roc_svg(const std::vector<NamedCurve>& curves, std::string_view title = "ROC");

// 64-bit FNV-1a, hex encoded.
std::string fingerprint(std::string_view text);

}  // namespace stripescan

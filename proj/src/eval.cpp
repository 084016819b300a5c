#include "stripescan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "stripescan/error.hpp"
#include "stripescan/io_util.hpp"

namespace stripescan {

std::string_view to_string(GroupLevel level) { return level == GroupLevel::kImage ? "image" : "patient"; }

int FoldAssignment::fold_of(const std::string& group) const {
  auto it = fold_of_group.find(group);
  if (it == fold_of_group.end()) throw Error(ErrorCode::kInvalidArgument, "unknown group '" + group + "'");
  return it->second;
}

std::vector<std::string> FoldAssignment::groups_in(int fold) const {
  std::vector<std::string> out;
  for (const auto& [g, f] : fold_of_group) {
    if (f == fold) out.push_back(g);
  }
  return out;
}

FoldAssignment grouped_kfold(const std::vector<std::string>& groups, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be >= 2");
  std::set<std::string> distinct(groups.begin(), groups.end());
  if (distinct.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kTooFewGroups,
                std::to_string(distinct.size()) + " groups cannot fill " + std::to_string(k) + " folds");
  }
  std::vector<std::string> order(distinct.begin(), distinct.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldAssignment a;
  a.k = k;
  a.group_level = GroupLevel::kImage;
  for (std::size_t i = 0; i < order.size(); ++i) a.fold_of_group[order[i]] = static_cast<int>(i % k);
  return a;
}

FoldAssignment leave_one_patient_out(const std::vector<std::string>& patients) {
  std::set<std::string> distinct(patients.begin(), patients.end());
  if (distinct.size() < 2) throw Error(ErrorCode::kTooFewGroups, "leave-one-patient-out needs at least two patients");
  FoldAssignment a;
  a.k = static_cast<int>(distinct.size());
  a.group_level = GroupLevel::kPatient;
  int f = 0;
  for (const auto& p : distinct) a.fold_of_group[p] = f++;
  return a;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::kLengthMismatch, "scores and labels differ in length");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorCode::kInvalidArgument, "non-finite score");
    pos += labels[i] == Label::kArtifact ? 1 : 0;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::kSingleClass, "ROC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve c;
  c.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  double area = 0.0;  // in units of (tp * fp) to keep sums exact
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      (labels[order[i]] == Label::kArtifact ? tp : fp) += 1;
    }
    area += 0.5 * static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
    c.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  c.auc = area / (static_cast<double>(pos) * static_cast<double>(neg));
  return c;
}

FoldAggregate aggregate_folds(const std::vector<FoldScores>& folds) {
  FoldAggregate agg;
  std::vector<double> all_scores;
  std::vector<Label> all_labels;
  std::vector<double> valid;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    if (fold.scores.size() != fold.labels.size()) {
      throw Error(ErrorCode::kLengthMismatch, "fold " + std::to_string(f) + ": scores and labels differ in length");
    }
    all_scores.insert(all_scores.end(), fold.scores.begin(), fold.scores.end());
    all_labels.insert(all_labels.end(), fold.labels.begin(), fold.labels.end());
    const auto pos = std::count(fold.labels.begin(), fold.labels.end(), Label::kArtifact);
    const auto neg = static_cast<std::ptrdiff_t>(fold.labels.size()) - pos;
    if (pos == 0 || neg == 0) {
      agg.fold_auc.push_back(std::nullopt);
      agg.skipped_folds.push_back(static_cast<int>(f));
      continue;
    }
    const double auc = roc_curve(fold.scores, fold.labels).auc;
    agg.fold_auc.push_back(auc);
    valid.push_back(auc);
  }
  if (valid.empty()) throw Error(ErrorCode::kNoValidFold, "no fold contains both classes");
  agg.pooled = roc_curve(all_scores, all_labels);
  agg.mean_auc = std::accumulate(valid.begin(), valid.end(), 0.0) / static_cast<double>(valid.size());
  if (valid.size() > 1) {
    double ss = 0.0;
    for (double v : valid) ss += (v - agg.mean_auc) * (v - agg.mean_auc);
    agg.std_auc = std::sqrt(ss / static_cast<double>(valid.size() - 1));
  }
  return agg;
}

double tpr_at(const RocCurve& curve, double fpr) {
  double best = 0.0;
  for (const auto& p : curve.points) {
    if (p.fpr <= fpr) best = std::max(best, p.tpr);
  }
  return best;
}

VerticalAverage vertical_average(const std::vector<RocCurve>& curves, int n_points) {
  if (curves.empty()) throw Error(ErrorCode::kNoValidFold, "no curves to average");
  if (n_points < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two FPR positions");
  VerticalAverage v;
  for (int i = 0; i < n_points; ++i) {
    const double x = static_cast<double>(i) / (n_points - 1);
    double sum = 0.0, sq = 0.0;
    for (const auto& c : curves) {
      const double t = tpr_at(c, x);
      sum += t;
      sq += t * t;
    }
    const double n = static_cast<double>(curves.size());
    const double mean = sum / n;
    v.fpr.push_back(x);
    v.tpr_mean.push_back(mean);
    v.tpr_std.push_back(std::sqrt(std::max(0.0, sq / n - mean * mean)));
  }
  return v;
}

std::string format_roc_csv(const RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : curve.points) {
    out += (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) + "," + format_double(p.fpr) +
           "," + format_double(p.tpr) + "\n";
  }
  return out;
}

std::string format_vertical_csv(const VerticalAverage& avg) {
  std::string out = "fpr,tpr_mean,tpr_std\n";
  for (std::size_t i = 0; i < avg.fpr.size(); ++i) {
    out += format_double(avg.fpr[i]) + "," + format_double(avg.tpr_mean[i]) + "," + format_double(avg.tpr_std[i]) +
           "\n";
  }
  return out;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string render_roc_svg(const std::vector<NamedCurve>& curves, std::string_view title) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  constexpr double kLeft = 60, kTop = 40, kSize = 400;
  auto px = [&](double fpr) { return fixed(kLeft + fpr * kSize); };
  auto py = [&](double tpr) { return fixed(kTop + (1.0 - tpr) * kSize); };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"500\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"500\" height=\"500\" fill=\"white\"/>\n";
  svg += "<text x=\"260\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + xml_escape(title) + "</text>\n";
  svg += "<rect x=\"60\" y=\"40\" width=\"400\" height=\"400\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double t = i / 5.0;
    svg += "<line x1=\"" + px(t) + "\" y1=\"440\" x2=\"" + px(t) + "\" y2=\"445\" stroke=\"black\"/>";
    svg += "<text x=\"" + px(t) + "\" y=\"458\" text-anchor=\"middle\">" + fixed(t, 1) + "</text>\n";
    svg += "<line x1=\"55\" y1=\"" + py(t) + "\" x2=\"60\" y2=\"" + py(t) + "\" stroke=\"black\"/>";
    svg += "<text x=\"50\" y=\"" + fixed(kTop + (1.0 - t) * kSize + 4) + "\" text-anchor=\"end\">" + fixed(t, 1) +
           "</text>\n";
  }
  svg += "<text x=\"260\" y=\"480\" text-anchor=\"middle\">False positive rate</text>\n";
  svg += "<text x=\"18\" y=\"240\" text-anchor=\"middle\" transform=\"rotate(-90 18 240)\">True positive rate</text>\n";
  svg += "<line x1=\"60\" y1=\"440\" x2=\"460\" y2=\"40\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    std::string pts;
    for (const auto& p : curves[i].curve.points) pts += px(p.fpr) + "," + py(p.tpr) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts +
           "\"/>\n";
    const double ly = 400 - 18.0 * static_cast<double>(curves.size() - 1 - i);
    svg += "<line x1=\"250\" y1=\"" + fixed(ly) + "\" x2=\"270\" y2=\"" + fixed(ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>";
    svg += "<text x=\"276\" y=\"" + fixed(ly + 4) + "\">" + xml_escape(curves[i].name) +
           " (AUC " + fixed(curves[i].curve.auc, 3) + ")</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string fingerprint(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace stripescan

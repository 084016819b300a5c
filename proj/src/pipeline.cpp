#include "stripescan/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "stripescan/error.hpp"
#include "stripescan/io_util.hpp"
#include "stripescan/parallel.hpp"

namespace stripescan {

std::vector<double> slice_features(const GrayImage& slice, FeatureKind kind, const PipelineConfig& cfg) {
  if (kind == FeatureKind::kHog36) return hog_stats(hog_descriptor(slice, cfg.hog), cfg.hog.bins);
  return corr_angle(slice, cfg.corrangle);
}

PreparedImage prepare_image(const GrayImage& raw, const PipelineConfig& cfg) {
  PreparedImage p;
  p.fov = detect_fov(raw, cfg.preprocess.fov_floor);
  p.snr = snr_estimate(raw, p.fov);
  p.compressed = quantile_compress(raw, cfg.preprocess.q_low, cfg.preprocess.q_high, &p.fov);
  return p;
}

int FeatureRun::count(std::string_view status) const {
  return static_cast<int>(std::count_if(outcomes.begin(), outcomes.end(),
                                        [&](const ImageOutcome& o) { return o.status == status; }));
}

FeatureRun run_features(const DatasetManifest& manifest, FeatureKind kind, const PipelineConfig& cfg) {
  cfg.validate();
  const auto params = cfg.slices.params_for(kind);
  const std::size_t n = manifest.entries.size();
  std::vector<std::vector<FeatureRow>> rows(n);
  std::vector<ImageOutcome> outcomes(n);

  parallel_for(n, [&](std::size_t i) {
    const auto& entry = manifest.entries[i];
    auto& out = outcomes[i];
    out.image_id = entry.image_id;
    if (entry.excluded) {
      out.status = "excluded";
      out.reason = entry.reason.empty() ? "excluded in manifest" : entry.reason;
      return;
    }
    try {
      const auto raw = read_image(manifest.resolve(entry));
      const auto prepared = prepare_image(raw, cfg);
      out.snr = prepared.snr;
      if (prepared.snr < cfg.preprocess.snr_threshold) {
        out.status = "excluded";
        out.reason = "low SNR (" + format_double(prepared.snr) + " < " + format_double(cfg.preprocess.snr_threshold) +
                     ")";
        return;
      }
      for (const auto& slice : extract_slices(prepared.compressed, prepared.fov, entry, params)) {
        FeatureRow row;
        row.provenance = {slice.patient_id, slice.sequence_id, slice.image_id, slice.row_start};
        row.label = slice.label;
        row.values = slice_features(slice.pixels, kind, cfg);
        rows[i].push_back(std::move(row));
      }
      out.status = "ok";
      out.slices = static_cast<int>(rows[i].size());
    } catch (const Error& e) {
      rows[i].clear();
      out.status = "failed";
      out.reason = e.what();
    }
  });

  FeatureRun run;
  run.matrix.kind = kind;
  for (auto& r : rows) std::move(r.begin(), r.end(), std::back_inserter(run.matrix.rows));
  run.outcomes = std::move(outcomes);
  return run;
}

FeatureMeta feature_meta(FeatureKind kind, const PipelineConfig& cfg, int dimension) {
  return {kind, cfg.hog, cfg.corrangle, cfg.slices.params_for(kind), dimension};
}

namespace {

std::string group_key(const Provenance& p, CvMode mode) {
  return mode == CvMode::kGrouped ? image_key(p) : p.patient_id;
}

std::size_t shared_keys(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  for (const auto& k : a) n += b.contains(k) ? 1 : 0;
  return n;
}

// Seeds for the per-fold random streams, spread so consecutive folds never
// reuse each other's tree seeds.
std::uint64_t fold_seed(std::uint64_t seed, int fold, std::uint64_t salt) {
  return seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(fold) + 1) + salt;
}

}  // namespace

CvReport train_eval(const FeatureMatrix& m, ModelKind kind, const PipelineConfig& cfg) {
  cfg.validate();
  m.check_rectangular();
  if (m.rows.empty()) throw Error(ErrorCode::kTooFewRows, "feature matrix is empty");

  CvReport report;
  report.feature_kind = m.kind;
  report.model_kind = kind;

  std::vector<std::string> keys;
  keys.reserve(m.rows.size());
  for (const auto& r : m.rows) keys.push_back(group_key(r.provenance, cfg.cv.mode));
  report.folds = cfg.cv.mode == CvMode::kGrouped ? grouped_kfold(keys, cfg.cv.k, cfg.seed) : leave_one_patient_out(keys);

  report.scores.assign(m.rows.size(), 0.0);
  std::vector<FoldScores> fold_scores;
  for (int f = 0; f < report.folds.k; ++f) {
    FoldReport fr;
    fr.fold = f;
    fr.test_groups = report.folds.groups_in(f);
    std::vector<std::size_t> train_idx;
    std::set<std::string> train_keys, test_keys, train_images, test_images;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      const bool test = report.folds.fold_of(keys[i]) == f;
      (test ? fr.test_indices : train_idx).push_back(i);
      (test ? test_keys : train_keys).insert(keys[i]);
      (test ? test_images : train_images).insert(image_key(m.rows[i].provenance));
    }
    fr.leakage = shared_keys(train_keys, test_keys);
    fr.image_leakage = shared_keys(train_images, test_images);
    fr.test_rows = fr.test_indices.size();
    report.leakage_total += fr.leakage + fr.image_leakage;

    const FeatureMatrix train = m.subset(train_idx);
    const FeatureMatrix test = m.subset(fr.test_indices);
    if (train.count(Label::kArtifact) == 0 || train.count(Label::kClean) == 0) {
      fr.warning = "fold " + std::to_string(f) + ": training rows hold a single class; fold skipped";
      report.warnings.push_back(fr.warning);
      report.fold_reports.push_back(std::move(fr));
      continue;
    }

    const FeatureMatrix balanced = undersample(train, fold_seed(cfg.seed, f, 1));
    fr.train_rows = balanced.rows.size();
    fr.train_artifact = balanced.count(Label::kArtifact);
    fr.train_clean = balanced.count(Label::kClean);

    TrainConfig tc = cfg.train;
    tc.seed = fold_seed(cfg.train.seed, f, 2);
    if (kind == ModelKind::kLinearSvm) {
      const auto state = fit_standardizer(balanced);
      fr.model = train_linear_svm(apply_standardizer(state, balanced), state, tc);
    } else {
      fr.model = train_random_forest(balanced, tc);
    }
    fr.scores = predict_score(*fr.model, test);
    for (std::size_t t = 0; t < fr.test_indices.size(); ++t) report.scores[fr.test_indices[t]] = fr.scores[t];

    FoldScores fs;
    fs.scores = fr.scores;
    for (const auto& r : test.rows) fs.labels.push_back(r.label);
    const auto pos = test.count(Label::kArtifact);
    if (pos > 0 && pos < test.rows.size()) {
      fr.auc = roc_curve(fs.scores, fs.labels).auc;
    } else {
      fr.warning = "fold " + std::to_string(f) + ": test rows hold a single class; excluded from the per-fold mean";
      report.warnings.push_back(fr.warning);
    }
    fold_scores.push_back(std::move(fs));
    report.fold_reports.push_back(std::move(fr));
  }

  if (fold_scores.empty()) throw Error(ErrorCode::kNoValidFold, "no fold could be trained");
  report.aggregate = aggregate_folds(fold_scores);
  std::vector<RocCurve> curves;
  for (const auto& fs : fold_scores) {
    const auto pos = std::count(fs.labels.begin(), fs.labels.end(), Label::kArtifact);
    if (pos > 0 && pos < static_cast<std::ptrdiff_t>(fs.labels.size())) curves.push_back(roc_curve(fs.scores, fs.labels));
  }
  report.vertical = vertical_average(curves);
  return report;
}

nlohmann::json summary_json(const CvReport& r, const PipelineConfig& cfg) {
  auto folds = nlohmann::json::array();
  auto fold_aucs = nlohmann::json::array();
  for (const auto& f : r.fold_reports) {
    nlohmann::json auc = f.auc ? nlohmann::json(*f.auc) : nlohmann::json(nullptr);
    fold_aucs.push_back(auc);
    folds.push_back({{"fold", f.fold},
                     {"test_groups", f.test_groups.size()},
                     {"test_rows", f.test_rows},
                     {"train_rows", f.train_rows},
                     {"train_artifact", f.train_artifact},
                     {"train_clean", f.train_clean},
                     {"leakage", f.leakage + f.image_leakage},
                     {"trained", f.model.has_value()},
                     {"auc", auc}});
  }
  return {{"feature", std::string(to_string(r.feature_kind))},
          {"classifier", std::string(to_string(r.model_kind))},
          {"cv_mode", r.folds.group_level == GroupLevel::kImage ? "grouped" : "lopo"},
          {"group_level", std::string(to_string(r.folds.group_level))},
          {"k", r.folds.k},
          {"pooled_auc", r.aggregate.pooled.auc},
          {"fold_aucs", fold_aucs},
          {"skipped_folds", r.aggregate.skipped_folds},
          {"mean_auc", r.aggregate.mean_auc},
          {"std_auc", r.aggregate.std_auc},
          {"leakage", r.leakage_total},
          {"warnings", r.warnings},
          {"folds", folds},
          {"config_fingerprint", fingerprint(to_json(cfg).dump())}};
}

void write_cv_outputs(const CvReport& r, const FeatureMatrix& m, const PipelineConfig& cfg,
                      const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());

  for (const auto& f : r.fold_reports) {
    if (f.model) save_model(dir / ("fold_" + std::to_string(f.fold) + ".model.json"), *f.model);
  }
  std::vector<ScoreRow> scores;
  for (const auto& f : r.fold_reports) {
    if (!f.model) continue;
    for (std::size_t t = 0; t < f.test_indices.size(); ++t) {
      const auto& row = m.rows[f.test_indices[t]];
      scores.push_back({row.provenance, row.label, f.scores[t]});
    }
  }
  std::sort(scores.begin(), scores.end(),
            [](const ScoreRow& a, const ScoreRow& b) { return a.provenance < b.provenance; });
  write_file_atomic(dir / "scores.csv", format_score_csv(scores));
  write_file_atomic(dir / "roc.csv", format_roc_csv(r.aggregate.pooled));
  write_file_atomic(dir / "roc_vertical.csv", format_vertical_csv(r.vertical));
  write_file_atomic(dir / "summary.json", summary_json(r, cfg).dump(2) + "\n");

  std::vector<NamedCurve> curves{{"pooled", r.aggregate.pooled}};
  RocCurve vertical;
  for (std::size_t i = 0; i < r.vertical.fpr.size(); ++i) {
    vertical.points.push_back({r.vertical.fpr[i], r.vertical.tpr_mean[i], 0.0});
  }
  for (std::size_t i = 1; i < vertical.points.size(); ++i) {
    const auto& a = vertical.points[i - 1];
    const auto& b = vertical.points[i];
    vertical.auc += 0.5 * (b.fpr - a.fpr) * (a.tpr + b.tpr);
  }
  curves.push_back({"vertical mean", vertical});
  const std::string title = std::string(to_string(r.feature_kind)) + " + " + std::string(to_string(r.model_kind));
  write_file_atomic(dir / "roc.svg", render_roc_svg(curves, title));
  write_resolved_config(dir, cfg);
}

std::string format_score_csv(const std::vector<ScoreRow>& rows) {
  std::string out = "patient_id,sequence_id,image_id,row_start,label,score\n";
  for (const auto& r : rows) {
    out += csv_escape(r.provenance.patient_id) + "," + csv_escape(r.provenance.sequence_id) + "," +
           csv_escape(r.provenance.image_id) + "," + std::to_string(r.provenance.row_start) + "," +
           (r.label == Label::kArtifact ? "1" : "0") + "," + format_double(r.score) + "\n";
  }
  return out;
}

std::vector<ScoreRow> parse_score_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "empty score CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected{"patient_id", "sequence_id", "image_id", "row_start", "label", "score"};
  if (header != expected) {
    throw Error(ErrorCode::kParseError, "score CSV header must be patient_id,sequence_id,image_id,row_start,label,score");
  }
  std::vector<ScoreRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = "score CSV line " + std::to_string(line_no);
    if (f.size() != expected.size()) throw Error(ErrorCode::kParseError, where + ": expected 6 fields");
    ScoreRow r;
    r.provenance = {f[0], f[1], f[2], 0};
    auto [p1, e1] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), r.provenance.row_start);
    if (e1 != std::errc() || p1 != f[3].data() + f[3].size()) throw Error(ErrorCode::kParseError, where + ": bad row_start");
    if (f[4] == "1") {
      r.label = Label::kArtifact;
    } else if (f[4] != "0") {
      throw Error(ErrorCode::kParseError, where + ": label must be 0 or 1");
    }
    auto [p2, e2] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), r.score);
    if (e2 != std::errc() || p2 != f[5].data() + f[5].size()) throw Error(ErrorCode::kParseError, where + ": bad score");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path) { return parse_score_csv(read_text_file(path)); }

ImagePrediction predict_image(const TrainedModel& model, const GrayImage& raw, const PipelineConfig& cfg,
                              std::optional<FeatureKind> expected_kind) {
  if (expected_kind && *expected_kind != model.feature_kind) {
    throw Error(ErrorCode::kDimensionMismatch, "model was trained on " + std::string(to_string(model.feature_kind)) +
                                                   " features, not " + std::string(to_string(*expected_kind)));
  }
  ImagePrediction out;
  const auto prepared = prepare_image(raw, cfg);
  out.snr = prepared.snr;
  out.low_snr = prepared.snr < cfg.preprocess.snr_threshold;
  ManifestEntry entry;
  entry.patient_id = entry.sequence_id = entry.image_id = "input";
  const double threshold = decision_threshold(model.kind);
  for (const auto& s : extract_slices(prepared.compressed, prepared.fov, entry, cfg.slices.params_for(model.feature_kind))) {
    const double score = predict_score(model, slice_features(s.pixels, model.feature_kind, cfg));
    out.slices.push_back({s.row_start, s.row_end, score, score >= threshold ? Label::kArtifact : Label::kClean});
  }
  return out;
}

nlohmann::json to_json(const ImagePrediction& p) {
  auto slices = nlohmann::json::array();
  for (const auto& s : p.slices) {
    slices.push_back({{"row_start", s.row_start},
                      {"row_end", s.row_end},
                      {"score", s.score},
                      {"label", s.predicted == Label::kArtifact ? "artifact" : "clean"}});
  }
  return {{"snr", p.snr}, {"low_snr", p.low_snr}, {"slices", slices}};
}

}  // namespace stripescan

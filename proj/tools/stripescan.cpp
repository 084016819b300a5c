// stripescan: synthetic corpus generation, feature extraction, grouped
// cross-validation and scoring for motion-artifact detection.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stripescan/error.hpp"
#include "stripescan/io_util.hpp"
#include "stripescan/pipeline.hpp"
#include "stripescan/synth.hpp"

namespace fs = std::filesystem;
using namespace stripescan;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "TOML configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the configured seed");
  cmd->add_flag("--quiet", c.quiet, "Only print errors");
}

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config.empty()) cfg = load_pipeline_config(c.config);
  return cfg;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

int cmd_synth(const Common& c, const fs::path& out) {
  auto cfg = load_config(c);
  if (c.seed) cfg.synth.seed = *c.seed;
  cfg.validate();
  make_dir(out);
  const auto manifest = generate_dataset(cfg.synth, out);
  write_resolved_config(out, cfg);
  std::size_t artifacts = 0;
  for (const auto& e : manifest.entries) artifacts += e.artifact_intervals.empty() ? 0 : 1;
  if (!c.quiet) {
    std::printf("wrote %zu images (%zu with artifacts) and %s\n", manifest.entries.size(), artifacts,
                (out / "manifest.csv").string().c_str());
  }
  return 0;
}

int cmd_features(const Common& c, const fs::path& manifest_path, const std::string& feature, const fs::path& out) {
  auto cfg = load_config(c);
  if (c.seed) cfg.set_seed(*c.seed);
  const auto kind = parse_feature_kind(feature);
  const auto manifest = read_manifest(manifest_path);
  make_dir(out);
  const auto run = run_features(manifest, kind, cfg);
  const fs::path csv = out / (std::string(to_string(kind)) + ".csv");
  write_feature_csv(csv, run.matrix);
  write_feature_meta(csv, feature_meta(kind, cfg, static_cast<int>(run.matrix.dimension())));
  write_resolved_config(out, cfg);

  nlohmann::json log = nlohmann::json::array();
  for (const auto& o : run.outcomes) {
    log.push_back({{"image_id", o.image_id}, {"status", o.status}, {"reason", o.reason}, {"snr", o.snr},
                   {"slices", o.slices}});
    if (o.status != "ok") std::fprintf(stderr, "%s %s: %s\n", o.status.c_str(), o.image_id.c_str(), o.reason.c_str());
  }
  write_file_atomic(out / (std::string(to_string(kind)) + ".log.json"), log.dump(2) + "\n");
  if (!c.quiet) {
    std::printf("%s: %zu slices x %zu features from %d images (%d excluded, %d failed) -> %s\n",
                std::string(to_string(kind)).c_str(), run.matrix.rows.size(), run.matrix.dimension(), run.count("ok"),
                run.count("excluded"), run.count("failed"), csv.string().c_str());
  }
  return 0;
}

int cmd_train_eval(const Common& c, const fs::path& features, const std::string& classifier,
                   const std::optional<std::string>& cv, const fs::path& out) {
  auto cfg = load_config(c);
  if (c.seed) cfg.set_seed(*c.seed);
  if (cv) cfg.cv.mode = parse_cv_mode(*cv);
  if (cv && *cv == "grouped5") cfg.cv.k = 5;
  cfg.validate();
  const auto kind = parse_model_kind(classifier);
  const auto matrix = read_feature_csv(features);
  const auto report = train_eval(matrix, kind, cfg);
  write_cv_outputs(report, matrix, cfg, out);
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (!c.quiet) {
    std::printf("%s + %s, %s CV (k=%d)\n", std::string(to_string(matrix.kind)).c_str(),
                std::string(to_string(kind)).c_str(), std::string(to_string(report.folds.group_level)).c_str(),
                report.folds.k);
    for (const auto& f : report.fold_reports) {
      if (f.auc) {
        std::printf("  fold %d: AUC %.4f (%zu test slices)\n", f.fold, *f.auc, f.test_rows);
      } else {
        std::printf("  fold %d: no AUC (%zu test slices)\n", f.fold, f.test_rows);
      }
    }
    std::printf("pooled AUC %.4f, per-fold mean %.4f +- %.4f, group leakage %zu\n", report.aggregate.pooled.auc,
                report.aggregate.mean_auc, report.aggregate.std_auc, report.leakage_total);
    std::printf("outputs in %s\n", out.string().c_str());
  }
  return 0;
}

int cmd_predict(const Common& c, const fs::path& model_path, const fs::path& image_path,
                const std::optional<std::string>& feature, const std::optional<fs::path>& json_out) {
  auto cfg = load_config(c);
  const auto model = load_model(model_path);
  std::optional<FeatureKind> expected;
  if (feature) expected = parse_feature_kind(*feature);
  const auto raw = read_image(image_path);
  const auto pred = predict_image(model, raw, cfg, expected);
  if (pred.low_snr) {
    std::fprintf(stderr, "warning: SNR %.3f is below the exclusion threshold %.3f\n", pred.snr,
                 cfg.preprocess.snr_threshold);
  }
  if (!c.quiet) {
    std::printf("row_start  row_end  score       label\n");
    for (const auto& s : pred.slices) {
      std::printf("%9d  %7d  %-10.6f  %s\n", s.row_start, s.row_end, s.score,
                  s.predicted == Label::kArtifact ? "artifact" : "clean");
    }
  }
  if (json_out) write_file_atomic(*json_out, to_json(pred).dump(2) + "\n");
  return 0;
}

int cmd_roc_plot(const Common& c, const std::vector<fs::path>& inputs, const std::vector<std::string>& names,
                 const fs::path& out) {
  if (!names.empty() && names.size() != inputs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "--name must be given once per input file");
  }
  make_dir(out);
  std::vector<NamedCurve> curves;
  nlohmann::json summary = nlohmann::json::array();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto rows = read_score_csv(inputs[i]);
    std::vector<double> scores;
    std::vector<Label> labels;
    for (const auto& r : rows) {
      scores.push_back(r.score);
      labels.push_back(r.label);
    }
    const auto curve = roc_curve(scores, labels);
    const std::string name = names.empty() ? inputs[i].stem().string() : names[i];
    curves.push_back({name, curve});
    const std::string csv = inputs.size() == 1 ? "roc.csv" : "roc_" + std::to_string(i) + ".csv";
    write_file_atomic(out / csv, format_roc_csv(curve));
    summary.push_back({{"name", name}, {"input", inputs[i].string()}, {"rows", rows.size()}, {"auc", curve.auc},
                       {"roc_csv", csv}});
    if (!c.quiet) std::printf("%s: AUC %.4f over %zu rows\n", name.c_str(), curve.auc, rows.size());
  }
  write_file_atomic(out / "roc.svg", render_roc_svg(curves));
  write_file_atomic(out / "roc_summary.json", summary.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-artifact detection for row-scanned circular-FOV microscopy images"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "stripescan 1.0.0");

  Common common;
  fs::path out;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus (PNG images, manifest, sidecars)");
  add_common(synth, common);
  synth->add_option("--out", out, "Output directory (created if missing)")->required();

  fs::path manifest;
  std::string feature = "corrangle";
  auto* features = app.add_subcommand("features", "Extract slice features for every manifest image");
  add_common(features, common);
  features->add_option("manifest", manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  features->add_option("--feature", feature, "Feature kind")->check(CLI::IsMember({"hog36", "corrangle"}));
  features->add_option("--out", out, "Output directory")->required();

  fs::path feature_csv;
  std::string classifier = "rf";
  std::optional<std::string> cv;
  auto* train = app.add_subcommand("train-eval", "Grouped cross-validation with per-fold models and ROC output");
  add_common(train, common);
  train->add_option("features", feature_csv, "Feature CSV from `features`")->required()->check(CLI::ExistingFile);
  train->add_option("--classifier", classifier, "Classifier")->check(CLI::IsMember({"rf", "svm"}));
  train->add_option("--cv", cv, "Cross-validation mode (default from config)")
      ->check(CLI::IsMember({"grouped5", "lopo"}));
  train->add_option("--out", out, "Output directory")->required();

  fs::path model_path, image_path;
  std::optional<std::string> predict_feature;
  std::optional<fs::path> json_out;
  auto* predict = app.add_subcommand("predict", "Score the slices of one image with a saved model");
  add_common(predict, common);
  predict->add_option("model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("image", image_path, "PNG or PGM image")->required()->check(CLI::ExistingFile);
  predict->add_option("--feature", predict_feature, "Expected feature kind")
      ->check(CLI::IsMember({"hog36", "corrangle"}));
  predict->add_option("--json", json_out, "Also write the scores as JSON");

  std::vector<fs::path> score_files;
  std::vector<std::string> names;
  auto* roc = app.add_subcommand("roc-plot", "ROC curves, AUCs and an SVG plot from score CSVs");
  add_common(roc, common);
  roc->add_option("scores", score_files, "CSV files patient_id,sequence_id,image_id,row_start,label,score")
      ->required()
      ->check(CLI::ExistingFile);
  roc->add_option("--name", names, "Legend name per input");
  roc->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(common, out);
    if (*features) return cmd_features(common, manifest, feature, out);
    if (*train) return cmd_train_eval(common, feature_csv, classifier, cv, out);
    if (*predict) return cmd_predict(common, model_path, image_path, predict_feature, json_out);
    if (*roc) return cmd_roc_plot(common, score_files, names, out);
  } catch (const Error& e) {
    // Every library error traces back to inputs or configuration.
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 2;
}

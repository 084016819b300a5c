#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "stripescan/classify.hpp"
#include "stripescan/features.hpp"
#include "stripescan/imagecore.hpp"
#include "stripescan/synth.hpp"

namespace stripescan {

struct PreprocessConfig {
  double q_low = 0.02;
  double q_high = 0.98;
  double snr_threshold = 1.5;
  double fov_floor = 1.0;  // raw-scale intensity floor for FOV detection

  bool operator==(const PreprocessConfig&) const = default;
};

struct SliceConfig {
  int height = 128;
  double overlap_hog = 0.3;
  double overlap_corrangle = 0.5;
  std::optional<double> overlap;  // overrides the per-kind values when set
  double positivity = 0.25;

  SliceParams params_for(FeatureKind kind) const;
  bool operator==(const SliceConfig&) const = default;
};

enum class CvMode { kGrouped, kLeaveOnePatientOut };
std::string_view to_string(CvMode mode);
CvMode parse_cv_mode(std::string_view text);  // "grouped5" / "grouped" / "lopo"

struct CvConfig {
  CvMode mode = CvMode::kGrouped;
  int k = 5;

  bool operator==(const CvConfig&) const = default;
};

struct PipelineConfig {
  std::uint64_t seed = 0;  // fold assignment, undersampling and training
  PreprocessConfig preprocess;
  SliceConfig slices;
  HogConfig hog;
  CorrAngleConfig corrangle;
  TrainConfig train;
  CvConfig cv;
  SynthConfig synth;

  // Throws kInvalidArgument with the offending key.
  void validate() const;
  // Sets the top-level seed and everything derived from it.
  void set_seed(std::uint64_t s);
  bool operator==(const PipelineConfig&) const = default;
};

nlohmann::json to_json(const PipelineConfig& cfg);
// Strict: unknown keys and wrong types are errors; missing keys keep defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

PipelineConfig parse_pipeline_toml(std::string_view text, std::string_view source = "config");
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Writes resolved-config.json into `dir`.
void write_resolved_config(const std::filesystem::path& dir, const PipelineConfig& cfg);

}  // namespace stripescan

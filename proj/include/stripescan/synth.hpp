#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stripescan/image.hpp"
#include "stripescan/imagecore.hpp"
#include "stripescan/manifest.hpp"

namespace stripescan {

struct SynthConfig {
  int width = 578;
  int height = 576;
  std::uint64_t seed = 0;

  int patients = 12;
  int sequences_per_patient = 2;
  int images_per_sequence = 5;

  double artifact_prob = 0.5;
  double stretch_ratio = 0.25;  // share of artifact images that get a stretch band
  double shift_max = 3.0;       // stripe shift drawn uniformly from [-shift_max, shift_max] px/row
  double stretch_min = 2.0;
  double stretch_max = 6.0;
  int band_min = 64;
  int band_max = 256;

  // Texture: elliptical Gaussian blobs on a noisy background, in units where
  // the background level is 0 and a unit-amplitude blob peaks at 1.
  double blob_density = 100.0;  // blobs per 10^4 pixels
  double sigma_minor_lo = 0.5;
  double sigma_minor_hi = 0.6;
  double sigma_major_lo = 2.5;
  double sigma_major_hi = 3.0;
  double amplitude_lo = 0.5;
  double amplitude_hi = 1.0;
  // Orientation domains per 578x576 area; 0 draws every blob orientation
  // independently. Inside a domain, orientations scatter by `orientation_jitter`
  // radians around the domain angle.
  double orientation_domains = 8.0;
  double orientation_jitter = 0.05;
  double noise = 0.03;

  double intensity_offset = 6000.0;
  double intensity_gain = 9000.0;

  void validate() const;
  int image_count() const { return patients * sequences_per_patient * images_per_sequence; }
  bool operator==(const SynthConfig&) const = default;
};

nlohmann::json to_json(const SynthConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& j);

enum class ArtifactKind { kStripe, kStretch };
std::string_view to_string(ArtifactKind kind);

struct SynthArtifact {
  ArtifactKind kind = ArtifactKind::kStripe;
  RowInterval rows;
  double shift = 0.0;   // stripe only
  double factor = 1.0;  // stretch only
};

struct SynthImage {
  GrayImage image;  // 16-bit scale, zero outside the disc
  FovMask fov;      // analytic disc
};

struct SynthRecord {
  SynthImage data;
  std::vector<SynthArtifact> artifacts;
  ManifestEntry entry;
  std::uint64_t seed = 0;
};

// Centred disc of diameter min(width, height) - 4 as a FovMask.
FovMask disc_mask(int width, int height);

// Texture over a width x height canvas (no disc), 16-bit scale.
GrayImage render_texture(const SynthConfig& cfg, int width, int height, std::mt19937_64& rng);

// Zeroes everything outside the mask; in-mask pixels are rounded and lifted
// to >= 2 so the disc survives FOV detection.
void apply_disc(GrayImage& img, const FovMask& disc);

SynthImage generate_clean(const SynthConfig& cfg, std::mt19937_64& rng);

// Row a is kept; row r in (a, b) becomes row a translated by (r - a) * shift
// (linear resampling, edge clamped) plus Gaussian noise with sigma 1 % of the
// image's max - min. Throws kBandOutOfFov unless band lies within `valid_rows`.
void inject_stripe(GrayImage& img, RowInterval band, double shift, std::mt19937_64& rng, RowInterval valid_rows);

// Band replaced by its central 1/factor portion stretched vertically back to
// the band height (linear interpolation).
void inject_stretch(GrayImage& img, RowInterval band, double factor, RowInterval valid_rows);

// Image `index` of the corpus, drawn from seed cfg.seed + index.
SynthRecord generate_record(const SynthConfig& cfg, int index);

nlohmann::json sidecar_json(const SynthRecord& record);

// Writes images/{image_id}.png, images/{image_id}.json and manifest.csv.
DatasetManifest generate_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace stripescan

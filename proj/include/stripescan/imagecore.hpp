#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stripescan/image.hpp"
#include "stripescan/manifest.hpp"

namespace stripescan {

enum class Label : int { kClean = 0, kArtifact = 1 };

// Circular field of view. Every row in [row_min, row_max] holds a single
// contiguous run of true pixels.
struct FovMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;
  int x_extent = 0;  // widest run over all rows
  int x_start = 0;   // first column of that widest run
  int row_min = 0;
  int row_max = -1;

  bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
};

// Sorted-order statistic with linear interpolation between closest ranks.
double quantile(std::vector<double> values, double q);

// Maps quantile(q_low) -> 0 and quantile(q_high) -> 255, clips and rounds
// half up. With a mask the quantiles are taken over FOV pixels only.
// Throws kDegenerateRange when both quantiles coincide.
GrayImage quantile_compress(const GrayImage& img, double q_low, double q_high, const FovMask* mask = nullptr);

// mean / population stddev over the FOV; returns the largest double when the
// FOV is constant.
double snr_estimate(const GrayImage& img, const FovMask& mask);

// Pixels strictly above `intensity_floor`, filled per row between the
// outermost hits, rows with runs shorter than two pixels dropped. Only the
// longest vertically contiguous run of non-empty rows is kept.
FovMask detect_fov(const GrayImage& img, double intensity_floor = 1.0);

struct SliceParams {
  int height = 128;
  double overlap = 0.5;
  double positivity = 0.25;  // minimum fraction of artifact rows for a positive label
};

struct SliceRecord {
  std::string patient_id;
  std::string sequence_id;
  std::string image_id;
  int row_start = 0;
  int row_end = 0;  // exclusive
  GrayImage pixels;
  Label label = Label::kClean;
  double artifact_row_fraction = 0.0;
};

// Start rows produced by the stride rule plus the bottom-anchored final slice.
std::vector<int> slice_starts(int row_min, int row_max, int height, double overlap);

std::vector<SliceRecord> extract_slices(const GrayImage& img, const FovMask& mask, const ManifestEntry& entry,
                                        const SliceParams& params);

// Debug dump, one PNG per slice named {image_id}_r{row_start}.png.
void dump_slices(const std::vector<SliceRecord>& slices, const std::filesystem::path& dir);

}  // namespace stripescan

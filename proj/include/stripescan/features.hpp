#pragma once

#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stripescan/image.hpp"

namespace stripescan {

enum class FeatureKind { kHog36, kCorrAngle };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

struct HogConfig {
  int cell = 32;
  int block = 64;
  int bins = 9;
  int block_stride = 32;
  double clip = 0.2;

  // Throws kInvalidArgument when the geometry is inconsistent.
  void validate() const;
  bool operator==(const HogConfig&) const = default;
};

struct CorrAngleConfig {
  int radius = 8;
  int segment_len = 64;
  int n_angles = 13;
  double angle_lo = std::numbers::pi / 8.0;
  double angle_hi = 7.0 * std::numbers::pi / 8.0;

  void validate() const;
  // Endpoint-inclusive, equally spaced.
  std::vector<double> angle_grid() const;
  bool operator==(const CorrAngleConfig&) const = default;
};

// Dalal-Triggs descriptor without gamma/colour normalisation.
//
// Layout: blocks in row-major order; within a block, cells in row-major
// order; within a cell, `bins` orientation bins. Descriptor position modulo
// `bins` is therefore the orientation bin. Bin b is centred on b * 180/bins
// degrees and votes are split linearly between the two nearest bins.
std::vector<double> hog_descriptor(const GrayImage& slice, const HogConfig& cfg = {});

// Per orientation bin: population mean, population stddev, skewness g1 and
// excess kurtosis g2 over every block/cell occurrence of that bin. Output
// order is [means, stddevs, skews, kurtoses]. Zero-variance series report
// skew and kurtosis 0.
std::vector<double> hog_stats(std::span<const double> descriptor, int bins = 9);

// Per-row angle of maximum correlation, rows [R, height - R).
//
// For reference row i the reference is the horizontal segment of
// `segment_len` samples centred on the slice. Each candidate angle t selects a
// comparative segment of the same length centred at
//   (xc + R sin t, i + R cos t),
// i.e. on the circle of radius R around the reference centre, sampled
// bilinearly. The recorded value is the angle with the highest Pearson
// correlation, lowest index on ties; zero-variance segments correlate 0.
std::vector<double> corr_angle(const GrayImage& slice, const CorrAngleConfig& cfg = {});

// Pearson correlation; 0 when either input has (numerically) zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace stripescan

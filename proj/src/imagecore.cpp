#include "stripescan/imagecore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stripescan/error.hpp"

namespace stripescan {

std::size_t FovMask::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

GrayImage quantile_compress(const GrayImage& img, double q_low, double q_high, const FovMask* mask) {
  if (!(q_low >= 0.0 && q_low < q_high && q_high <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "need 0 <= q_low < q_high <= 1");
  }
  if (img.empty()) throw Error(ErrorCode::kInvalidArgument, "empty image");

  std::vector<double> sample;
  if (mask != nullptr) {
    if (mask->width != img.width() || mask->height != img.height()) {
      throw Error(ErrorCode::kInvalidArgument, "mask shape differs from image shape");
    }
    sample.reserve(mask->count());
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
      if (mask->mask[i]) sample.push_back(px[i]);
    }
    if (sample.empty()) throw Error(ErrorCode::kEmptyFov, "mask selects no pixels");
  } else {
    sample.assign(img.pixels().begin(), img.pixels().end());
  }

  std::sort(sample.begin(), sample.end());
  const double lo = quantile(sample, q_low);
  const double hi = quantile(std::move(sample), q_high);
  if (!(hi > lo)) throw Error(ErrorCode::kDegenerateRange, "quantiles coincide at " + std::to_string(lo));

  const double span = hi - lo;
  std::vector<double> out(img.size());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    // Multiply before dividing so exact half-way values stay exact.
    const double v = std::clamp((px[i] - lo) * 255.0 / span, 0.0, 255.0);
    out[i] = std::floor(v + 0.5);
  }
  return GrayImage(img.width(), img.height(), std::move(out), 8);
}

double snr_estimate(const GrayImage& img, const FovMask& mask) {
  if (mask.width != img.width() || mask.height != img.height()) {
    throw Error(ErrorCode::kInvalidArgument, "mask shape differs from image shape");
  }
  const auto px = img.pixels();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (mask.mask[i]) {
      sum += px[i];
      ++n;
    }
  }
  if (n < 2) throw Error(ErrorCode::kEmptyFov, "SNR needs at least two FOV pixels");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (mask.mask[i]) ss += (px[i] - mean) * (px[i] - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (sd == 0.0) return std::numeric_limits<double>::max();
  return mean / sd;
}

FovMask detect_fov(const GrayImage& img, double intensity_floor) {
  if (img.empty()) throw Error(ErrorCode::kInvalidArgument, "empty image");
  FovMask fov;
  fov.width = img.width();
  fov.height = img.height();
  fov.mask.assign(img.size(), 0);

  std::vector<bool> row_used(static_cast<std::size_t>(img.height()), false);
  for (int y = 0; y < img.height(); ++y) {
    int left = -1, right = -1;
    const auto row = img.row(y);
    for (int x = 0; x < img.width(); ++x) {
      if (row[x] > intensity_floor) {
        if (left < 0) left = x;
        right = x;
      }
    }
    if (left < 0 || right - left + 1 < 2) continue;
    row_used[y] = true;
    std::fill_n(fov.mask.begin() + static_cast<std::ptrdiff_t>(y) * fov.width + left, right - left + 1, 1);
  }

  // Keep the longest contiguous band of rows (first one on ties).
  int best_start = -1, best_len = 0;
  for (int y = 0; y < img.height();) {
    if (!row_used[y]) {
      ++y;
      continue;
    }
    int end = y;
    while (end < img.height() && row_used[end]) ++end;
    if (end - y > best_len) {
      best_len = end - y;
      best_start = y;
    }
    y = end;
  }
  if (best_len == 0) throw Error(ErrorCode::kNoFov, "no pixels above intensity floor " + std::to_string(intensity_floor));

  for (int y = 0; y < img.height(); ++y) {
    if (y < best_start || y >= best_start + best_len) {
      std::fill_n(fov.mask.begin() + static_cast<std::ptrdiff_t>(y) * fov.width, fov.width, 0);
    }
  }
  fov.row_min = best_start;
  fov.row_max = best_start + best_len - 1;
  for (int y = fov.row_min; y <= fov.row_max; ++y) {
    const auto* r = fov.mask.data() + static_cast<std::size_t>(y) * fov.width;
    const int left = static_cast<int>(std::find(r, r + fov.width, 1) - r);
    const int run = static_cast<int>(std::count(r, r + fov.width, std::uint8_t{1}));
    if (run > fov.x_extent) {
      fov.x_extent = run;
      fov.x_start = left;
    }
  }
  return fov;
}

std::vector<int> slice_starts(int row_min, int row_max, int height, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw Error(ErrorCode::kInvalidArgument, "overlap must lie in [0, 1)");
  if (height < 1) throw Error(ErrorCode::kInvalidArgument, "slice height must be positive");
  if (height > row_max - row_min + 1) {
    throw Error(ErrorCode::kSliceTooTall, "slice height " + std::to_string(height) + " exceeds FOV extent " +
                                              std::to_string(row_max - row_min + 1));
  }
  // The epsilon absorbs representation error such as 100 * (1 - 0.3) = 69.999...
  const int stride = std::max(1, static_cast<int>(std::floor(height * (1.0 - overlap) + 1e-9)));
  const int last = row_max - height + 1;
  std::vector<int> starts;
  for (int s = row_min; s <= last; s += stride) starts.push_back(s);
  if (starts.back() != last) starts.push_back(last);
  return starts;
}

std::vector<SliceRecord> extract_slices(const GrayImage& img, const FovMask& mask, const ManifestEntry& entry,
                                        const SliceParams& params) {
  if (mask.width != img.width() || mask.height != img.height()) {
    throw Error(ErrorCode::kInvalidArgument, "mask shape differs from image shape");
  }
  if (!(params.positivity >= 0.0 && params.positivity <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "positivity threshold must lie in [0, 1]");
  }
  validate_entry(entry, img.height());
  const auto intervals = normalize_intervals(entry.artifact_intervals);
  const auto starts = slice_starts(mask.row_min, mask.row_max, params.height, params.overlap);

  std::vector<SliceRecord> slices;
  slices.reserve(starts.size());
  for (int start : starts) {
    SliceRecord rec;
    rec.patient_id = entry.patient_id;
    rec.sequence_id = entry.sequence_id;
    rec.image_id = entry.image_id;
    rec.row_start = start;
    rec.row_end = start + params.height;

    GrayImage px(mask.x_extent, params.height, 8);
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < params.height; ++y) {
      for (int x = 0; x < mask.x_extent; ++x) {
        const int sx = mask.x_start + x;
        if (mask.at(sx, start + y)) {
          sum += img.at(sx, start + y);
          ++n;
        }
      }
    }
    const double fill = n > 0 ? sum / static_cast<double>(n) : 0.0;
    for (int y = 0; y < params.height; ++y) {
      for (int x = 0; x < mask.x_extent; ++x) {
        const int sx = mask.x_start + x;
        px.at(x, y) = mask.at(sx, start + y) ? img.at(sx, start + y) : fill;
      }
    }
    px.set_depth(img.depth());
    rec.pixels = std::move(px);
    rec.artifact_row_fraction =
        static_cast<double>(covered_rows(intervals, rec.row_start, rec.row_end)) / static_cast<double>(params.height);
    rec.label = rec.artifact_row_fraction >= params.positivity ? Label::kArtifact : Label::kClean;
    slices.push_back(std::move(rec));
  }
  return slices;
}

void dump_slices(const std::vector<SliceRecord>& slices, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : slices) {
    write_png(dir / (s.image_id + "_r" + std::to_string(s.row_start) + ".png"), s.pixels);
  }
}

}  // namespace stripescan

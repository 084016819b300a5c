#include "stripescan/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stripescan/error.hpp"

namespace stripescan {

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kHog36:
      return "hog36";
    case FeatureKind::kCorrAngle:
      return "corrangle";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "hog36") return FeatureKind::kHog36;
  if (text == "corrangle") return FeatureKind::kCorrAngle;
  throw Error(ErrorCode::kInvalidArgument, "unknown feature kind '" + std::string(text) + "'");
}

void HogConfig::validate() const {
  if (cell < 1 || block < cell || block % cell != 0) {
    throw Error(ErrorCode::kInvalidArgument, "HOG block must be a positive multiple of the cell size");
  }
  if (bins < 2) throw Error(ErrorCode::kInvalidArgument, "HOG needs at least two bins");
  if (block_stride < 1 || block_stride % cell != 0) {
    throw Error(ErrorCode::kInvalidArgument, "HOG block stride must be a positive multiple of the cell size");
  }
  if (!(clip > 0.0)) throw Error(ErrorCode::kInvalidArgument, "HOG clip must be positive");
}

void CorrAngleConfig::validate() const {
  if (n_angles < 2) throw Error(ErrorCode::kInvalidArgument, "corrAngle needs at least two angles");
  if (segment_len < 3) throw Error(ErrorCode::kInvalidArgument, "corrAngle segment must be >= 3 samples");
  if (radius < 1) throw Error(ErrorCode::kInvalidArgument, "corrAngle radius must be >= 1");
  if (!(angle_hi > angle_lo)) throw Error(ErrorCode::kInvalidArgument, "corrAngle angle range is empty");
}

std::vector<double> CorrAngleConfig::angle_grid() const {
  std::vector<double> grid(static_cast<std::size_t>(n_angles));
  const double step = (angle_hi - angle_lo) / static_cast<double>(n_angles - 1);
  for (int k = 0; k < n_angles; ++k) grid[k] = angle_lo + step * k;
  grid.back() = angle_hi;
  return grid;
}

std::vector<double> hog_descriptor(const GrayImage& slice, const HogConfig& cfg) {
  cfg.validate();
  const int w = slice.width();
  const int h = slice.height();
  if (w < cfg.block || h < cfg.block) {
    throw Error(ErrorCode::kSliceTooSmall, "slice " + std::to_string(w) + "x" + std::to_string(h) +
                                               " smaller than HOG block " + std::to_string(cfg.block));
  }
  const int ncx = w / cfg.cell;
  const int ncy = h / cfg.cell;
  const int bins = cfg.bins;
  const double bin_width = std::numbers::pi / bins;

  std::vector<double> cells(static_cast<std::size_t>(ncx) * ncy * bins, 0.0);
  for (int y = 0; y < ncy * cfg.cell; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    const int cy = y / cfg.cell;
    for (int x = 0; x < ncx * cfg.cell; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const double gx = slice.at(xp, y) - slice.at(xm, y);
      const double gy = slice.at(x, yp) - slice.at(x, ym);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += std::numbers::pi;
      if (angle >= std::numbers::pi) angle -= std::numbers::pi;
      const double pos = angle / bin_width;
      int b0 = static_cast<int>(std::floor(pos));
      const double frac = pos - b0;
      b0 %= bins;
      const int b1 = (b0 + 1) % bins;
      double* hist = cells.data() + (static_cast<std::size_t>(cy) * ncx + x / cfg.cell) * bins;
      hist[b0] += mag * (1.0 - frac);
      hist[b1] += mag * frac;
    }
  }

  const int cells_per_block = cfg.block / cfg.cell;
  const int step = cfg.block_stride / cfg.cell;
  const std::size_t block_len = static_cast<std::size_t>(cells_per_block) * cells_per_block * bins;
  std::vector<double> out;
  std::vector<double> v(block_len);
  for (int by = 0; by + cells_per_block <= ncy; by += step) {
    for (int bx = 0; bx + cells_per_block <= ncx; bx += step) {
      std::size_t k = 0;
      for (int cy = by; cy < by + cells_per_block; ++cy) {
        for (int cx = bx; cx < bx + cells_per_block; ++cx) {
          const double* hist = cells.data() + (static_cast<std::size_t>(cy) * ncx + cx) * bins;
          for (int b = 0; b < bins; ++b) v[k++] = hist[b];
        }
      }
      // L2-Hys; an all-zero block stays zero.
      for (int pass = 0; pass < 2; ++pass) {
        const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm == 0.0) break;
        for (double& e : v) e /= norm;
        if (pass == 0) {
          for (double& e : v) e = std::min(e, cfg.clip);
        }
      }
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  return out;
}

std::vector<double> hog_stats(std::span<const double> descriptor, int bins) {
  if (bins < 1) throw Error(ErrorCode::kInvalidArgument, "bins must be positive");
  if (descriptor.size() % static_cast<std::size_t>(bins) != 0) {
    throw Error(ErrorCode::kLengthMismatch, "descriptor length " + std::to_string(descriptor.size()) +
                                                " is not a multiple of " + std::to_string(bins));
  }
  std::vector<double> out(static_cast<std::size_t>(4 * bins), 0.0);
  const std::size_t n = descriptor.size() / bins;
  if (n == 0) return out;
  for (int b = 0; b < bins; ++b) {
    double sum = 0.0, lo = descriptor[b], hi = descriptor[b];
    for (std::size_t i = 0; i < n; ++i) {
      const double x = descriptor[i * bins + b];
      sum += x;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    const double mean = sum / static_cast<double>(n);
    out[b] = mean;
    if (lo == hi) {
      out[b] = lo;
      continue;
    }
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = descriptor[i * bins + b] - mean;
      const double d2 = d * d;
      m2 += d2;
      m3 += d2 * d;
      m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    out[bins + b] = std::sqrt(m2);
    out[2 * bins + b] = m3 / std::pow(m2, 1.5);
    out[3 * bins + b] = m4 / (m2 * m2) - 3.0;
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw Error(ErrorCode::kLengthMismatch, "pearson inputs differ in length");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  // Bilinear blends of a constant are not always bit-exact constants, so
  // "zero variance" is judged relative to the signal level.
  const double floor_a = n * 1e-24 * std::max(1.0, ma * ma);
  const double floor_b = n * 1e-24 * std::max(1.0, mb * mb);
  if (saa <= floor_a || sbb <= floor_b) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> corr_angle(const GrayImage& slice, const CorrAngleConfig& cfg) {
  cfg.validate();
  const int w = slice.width();
  const int h = slice.height();
  const int r = cfg.radius;
  if (w < cfg.segment_len + 2 * r) {
    throw Error(ErrorCode::kSliceTooNarrow, "slice width " + std::to_string(w) + " < segment_len + 2R");
  }
  if (h <= 2 * r) throw Error(ErrorCode::kSliceTooShort, "slice height " + std::to_string(h) + " <= 2R");

  const auto grid = cfg.angle_grid();
  const double xc = (w - 1) / 2.0;
  const double half = (cfg.segment_len - 1) / 2.0;
  const auto len = static_cast<std::size_t>(cfg.segment_len);

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(h - 2 * r));
  std::vector<double> ref(len), cmp(len);
  for (int i = r; i < h - r; ++i) {
    for (std::size_t t = 0; t < len; ++t) ref[t] = slice.sample_bilinear(xc - half + static_cast<double>(t), i);
    double best = -std::numeric_limits<double>::infinity();
    double best_angle = grid.front();
    for (double theta : grid) {
      const double cx = xc + r * std::sin(theta);
      const double cy = i + r * std::cos(theta);
      for (std::size_t t = 0; t < len; ++t) cmp[t] = slice.sample_bilinear(cx - half + static_cast<double>(t), cy);
      const double c = pearson(ref, cmp);
      if (c > best) {
        best = c;
        best_angle = theta;
      }
    }
    out.push_back(best_angle);
  }
  return out;
}

}  // namespace stripescan

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace stripescan {

// Row-major single-channel raster. Intensities are stored as double so the
// same type carries raw 16-bit data, compressed 8-bit data and slice buffers.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, int depth = 8, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> pixels, int depth = 8);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int depth() const noexcept { return depth_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double at(int x, int y) const { return pixels_[index(x, y)]; }
  double& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const double> row(int y) const {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<double> row(int y) {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> pixels() noexcept { return pixels_; }

  void set_depth(int depth);

  // Bilinear sample with coordinates clamped to the raster.
  double sample_bilinear(double x, double y) const;

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  int depth_ = 8;
  std::vector<double> pixels_;
};

// PNG (8/16-bit gray) and binary PGM (P5). Format is chosen by extension on
// write and by magic bytes on read. Values are rounded and clipped to the
// target depth on write.
GrayImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
void write_image(const std::filesystem::path& path, const GrayImage& img);

}  // namespace stripescan

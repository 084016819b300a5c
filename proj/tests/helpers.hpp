#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "stripescan/image.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("stripescan_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline stripescan::GrayImage random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 255.0,
                                          bool integral = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  stripescan::GrayImage img(w, h, 8);
  for (double& v : img.pixels()) v = integral ? std::round(u(rng)) : u(rng);
  return img;
}

}  // namespace testutil

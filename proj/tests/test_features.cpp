#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "stripescan/error.hpp"
#include "stripescan/features.hpp"
#include "stripescan/synth.hpp"

using namespace stripescan;

namespace {

double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

// Smooth random row, then row r = base row translated by r * shift pixels
// (integer shifts keep every row an exact copy).
GrayImage sheared(int w, int h, int shift, std::uint64_t seed) {
  const int pad = std::abs(shift) * h + 8;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  std::vector<double> raw(static_cast<std::size_t>(w + 2 * pad));
  for (double& v : raw) v = u(rng);
  std::vector<double> base(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    double s = 0.0, n = 0.0;
    for (int d = -3; d <= 3; ++d) {
      const auto j = static_cast<std::ptrdiff_t>(i) + d;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(raw.size())) continue;
      const double wgt = std::exp(-d * d / 8.0);
      s += wgt * raw[static_cast<std::size_t>(j)];
      n += wgt;
    }
    base[i] = s / n;
  }
  GrayImage img(w, h, 8);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = base[static_cast<std::size_t>(x - y * shift + pad)];
  return img;
}

int grid_index(const CorrAngleConfig& cfg, double angle) {
  const auto grid = cfg.angle_grid();
  return static_cast<int>(std::find(grid.begin(), grid.end(), angle) - grid.begin());
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("HOG matches the per-pixel oracle on random slices") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto img = testutil::random_image(64 + static_cast<int>(seed) * 7, 128, seed, 0.0, 255.0, seed % 2 == 0);
      const auto got = hog_descriptor(img);
      const auto want = oracle::hog(img, 32, 64, 9, 32, 0.2);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(rel_err(got[i], want[i]) < 1e-9);
    }
  }

  TEST_CASE("HOG layout for a 64x128 slice with other geometries") {
    const auto img = testutil::random_image(64, 128, 42);
    CHECK(hog_descriptor(img).size() == 3 * 36);
    HogConfig cfg{16, 32, 6, 16, 0.3};
    const auto got = hog_descriptor(img, cfg);
    CHECK(got.size() == static_cast<std::size_t>(3 * 7 * 4 * 6));
    const auto want = oracle::hog(img, 16, 32, 6, 16, 0.3);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(rel_err(got[i], want[i]) < 1e-9);
  }

  TEST_CASE("HOG of a constant slice is all zero; pure gradients land in one bin") {
    for (double v : hog_descriptor(GrayImage(64, 64, 8, 90.0))) CHECK(v == 0.0);
    // Intensity rising with x: gradient angle 0, bin 0 only.
    GrayImage ramp(64, 64, 8);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) ramp.at(x, y) = x;
    const auto d = hog_descriptor(ramp);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (i % 9 == 0) CHECK(d[i] > 0.0);
      else CHECK(d[i] == 0.0);
    }
    CHECK_THROWS_AS(hog_descriptor(GrayImage(63, 128)), Error);
  }

  TEST_CASE("HOG blocks are unit length after L2-Hys") {
    const auto d = hog_descriptor(testutil::random_image(96, 96, 9));
    for (std::size_t b = 0; b < d.size() / 36; ++b) {
      double n2 = 0.0;
      for (std::size_t i = 0; i < 36; ++i) {
        n2 += d[b * 36 + i] * d[b * 36 + i];
        CHECK(d[b * 36 + i] >= 0.0);
      }
      CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("hog_stats against raw-moment formulas") {
    std::mt19937_64 rng(3);
    std::gamma_distribution<double> g(2.0, 1.0);
    std::vector<double> d(9 * 25);
    for (double& v : d) v = g(rng);
    const auto s = hog_stats(d, 9);
    REQUIRE(s.size() == 36);
    for (int b = 0; b < 9; ++b) {
      long double e1 = 0, e2 = 0, e3 = 0, e4 = 0;
      for (int i = 0; i < 25; ++i) {
        const long double x = d[static_cast<std::size_t>(i * 9 + b)];
        e1 += x / 25;
        e2 += x * x / 25;
        e3 += x * x * x / 25;
        e4 += x * x * x * x / 25;
      }
      const long double var = e2 - e1 * e1;
      const long double mu3 = e3 - 3 * e1 * e2 + 2 * e1 * e1 * e1;
      const long double mu4 = e4 - 4 * e1 * e3 + 6 * e1 * e1 * e2 - 3 * e1 * e1 * e1 * e1;
      CHECK(rel_err(s[b], static_cast<double>(e1)) < 1e-9);
      CHECK(rel_err(s[9 + b], static_cast<double>(std::sqrt(var))) < 1e-9);
      CHECK(rel_err(s[18 + b], static_cast<double>(mu3 / std::pow(var, 1.5L))) < 1e-9);
      CHECK(rel_err(s[27 + b], static_cast<double>(mu4 / (var * var) - 3)) < 1e-9);
    }
  }

  TEST_CASE("hog_stats of a constant bin is mean only") {
    std::vector<double> d(9 * 4, 0.25);
    const auto s = hog_stats(d);
    for (int b = 0; b < 9; ++b) {
      CHECK(s[b] == 0.25);
      CHECK(s[9 + b] == 0.0);
      CHECK(s[18 + b] == 0.0);
      CHECK(s[27 + b] == 0.0);
    }
    CHECK_THROWS_AS(hog_stats(std::vector<double>(10), 9), Error);
  }

  TEST_CASE("pearson") {
    const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1}, k{5, 5, 5, 5};
    CHECK(pearson(a, b) == doctest::Approx(1.0));
    CHECK(pearson(a, c) == doctest::Approx(-1.0));
    CHECK(pearson(a, k) == 0.0);
    CHECK(pearson(std::vector<double>{1e6, 1e6, 1e6}, std::vector<double>{1e6 + 1e-7, 1e6, 1e6}) == 0.0);
    CHECK_THROWS_AS(pearson(a, std::vector<double>{1.0}), Error);
  }

  TEST_CASE("corrAngle output length and grid") {
    CorrAngleConfig cfg;
    const auto grid = cfg.angle_grid();
    REQUIRE(grid.size() == 13);
    CHECK(grid.front() == std::numbers::pi / 8);
    CHECK(grid.back() == 7 * std::numbers::pi / 8);
    CHECK(grid[6] == doctest::Approx(std::numbers::pi / 2));
    const auto out = corr_angle(testutil::random_image(120, 128, 1));
    CHECK(out.size() == 128 - 16);
    for (double v : out) CHECK(grid_index(cfg, v) < 13);
    CHECK_THROWS_AS(corr_angle(GrayImage(79, 128)), Error);
    CHECK_THROWS_AS(corr_angle(GrayImage(100, 16)), Error);
  }

  TEST_CASE("corrAngle follows the shear of a stripe") {
    CorrAngleConfig cfg;
    const auto grid = cfg.angle_grid();
    for (int s : {-2, -1, 1, 2}) {
      // The best angle minimises the residual horizontal offset
      // R (sin t - s cos t) between the comparative segment and the shear line.
      int expected = 0;
      for (int k = 1; k < 13; ++k)
        if (std::fabs(std::sin(grid[k]) - s * std::cos(grid[k])) <
            std::fabs(std::sin(grid[expected]) - s * std::cos(grid[expected])))
          expected = k;
      const auto out = corr_angle(sheared(200, 128, s, 7 + s));
      std::map<int, int> hist;
      for (double v : out) ++hist[grid_index(cfg, v)];
      CAPTURE(s);
      CHECK(hist[expected] >= static_cast<int>(0.95 * out.size()));
    }
    CHECK(std::fabs(std::sin(grid[2]) - std::cos(grid[2])) < 1e-12);  // s = 1 lands exactly on pi/4
  }

  TEST_CASE("corrAngle on an unsheared stripe picks the lower endpoint") {
    const auto out = corr_angle(sheared(200, 64, 0, 3));
    for (double v : out) CHECK(v == std::numbers::pi / 8);
  }

  TEST_CASE("vertical mirror reverses rows and reflects angles") {
    const auto img = testutil::random_image(150, 96, 12, 0.0, 255.0, false);
    GrayImage flipped(img.width(), img.height(), 8);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) flipped.at(x, y) = img.at(x, img.height() - 1 - y);
    CorrAngleConfig cfg;
    const auto a = corr_angle(img, cfg);
    const auto b = corr_angle(flipped, cfg);
    REQUIRE(a.size() == b.size());
    int agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      agree += grid_index(cfg, a[i]) == 12 - grid_index(cfg, b[a.size() - 1 - i]) ? 1 : 0;
    CHECK(agree >= static_cast<int>(0.98 * a.size()));
  }

  TEST_CASE("config validation") {
    CHECK_NOTHROW(HogConfig{}.validate());
    CHECK_THROWS_AS((HogConfig{32, 48, 9, 32, 0.2}.validate()), Error);
    CHECK_THROWS_AS((HogConfig{32, 64, 9, 16, 0.2}.validate()), Error);
    CHECK_THROWS_AS((HogConfig{32, 64, 1, 32, 0.2}.validate()), Error);
    CorrAngleConfig c;
    c.n_angles = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(parse_feature_kind("hog36") == FeatureKind::kHog36);
    CHECK(to_string(FeatureKind::kCorrAngle) == "corrangle");
    CHECK_THROWS_AS(parse_feature_kind("sift"), Error);
  }

  TEST_CASE("step edge votes into the horizontal-gradient bin only") {
    GrayImage step(64, 64, 8);
    for (int y = 0; y < 64; ++y)
      for (int x = 32; x < 64; ++x) step.at(x, y) = 255.0;
    const auto d = hog_descriptor(step);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (i % 9 != 0) CHECK(d[i] == 0.0);
    CHECK(*std::max_element(d.begin(), d.end()) > 0.0);
  }

  TEST_CASE("HOG on a full-width noise slice matches the oracle") {
    const auto img = testutil::random_image(576, 128, 99, 0.0, 255.0, false);
    const auto got = hog_descriptor(img);
    const auto want = oracle::hog(img, 32, 64, 9, 32, 0.2);
    REQUIRE(got.size() == want.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, rel_err(got[i], want[i]));
    CHECK(worst < 1e-9);
  }

  TEST_CASE("HOG values lie in [0, 1] and ignore an intensity offset") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto img = testutil::random_image(96, 128, seed, 0.0, 200.0, false);
      const auto d = hog_descriptor(img);
      for (double v : d) CHECK((v >= 0.0 && v <= 1.0));
      for (double& v : img.pixels()) v += 37.0;
      const auto shifted = hog_descriptor(img);
      for (std::size_t i = 0; i < d.size(); ++i) CHECK(shifted[i] == doctest::Approx(d[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("hog_stats worked examples and duplication invariance") {
    const auto ones = hog_stats(std::vector<double>{1, 1, 1, 1}, 1);
    CHECK(ones == std::vector<double>{1, 0, 0, 0});
    const auto s = hog_stats(std::vector<double>{0, 0, 0, 1}, 1);
    CHECK(s[0] == 0.25);
    CHECK(s[1] == doctest::Approx(std::sqrt(3.0) / 4));
    // Central moments: m2 = 3/16, m3 = 3/32, m4 = 21/256.
    CHECK(s[2] == doctest::Approx((3.0 / 32) / std::pow(3.0 / 16, 1.5)));
    CHECK(s[3] == doctest::Approx((21.0 / 256) / (9.0 / 256) - 3));
    for (double v : hog_stats(std::vector<double>(36, 0.0))) CHECK(v == 0.0);

    const auto d = hog_descriptor(testutil::random_image(64, 128, 5));
    auto doubled = d;
    doubled.insert(doubled.end(), d.begin(), d.end());
    const auto a = hog_stats(d), b = hog_stats(doubled);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
  }

  TEST_CASE("corrAngle on a constant slice records the first angle") {
    for (double v : corr_angle(GrayImage(100, 40, 8, 17.0))) CHECK(v == std::numbers::pi / 8);
  }

  TEST_CASE("corrAngle ignores affine intensity changes") {
    const auto img = testutil::random_image(120, 64, 21, 0.0, 255.0, false);
    auto scaled = img;
    for (double& v : scaled.pixels()) v = 2.5 * v + 40.0;
    const auto a = corr_angle(img), b = corr_angle(scaled);
    int same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
    // Floating-point near-ties may flip a rare row.
    CHECK(same >= static_cast<int>(a.size()) - 1);
  }

  // A zero shift repeats rows exactly; the grid has no vertical angle, so the
  // winner then follows the texture's horizontal autocorrelation instead.
  TEST_CASE("generator stripes: constant angle, monotone in the shift, mirrored by a left-right flip") {
    CorrAngleConfig cfg;
    const auto grid = cfg.angle_grid();
    SynthConfig sc;
    std::vector<double> implied;  // tan of the modal angle, dx per dy
    double stripe_sd = 0.0;
    for (int s : {-2, -1, 1, 2}) {
      std::mt19937_64 rng(40 + s);
      const int margin = 2 * 128 + 4;
      auto canvas = render_texture(sc, 200 + 2 * margin, 140, rng);
      inject_stripe(canvas, {4, 136}, s, rng, {0, 140});
      GrayImage slice(200, 128, 16), mirrored(200, 128, 16);
      for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 200; ++x) {
          slice.at(x, y) = canvas.at(margin + x, 6 + y);
          mirrored.at(199 - x, y) = slice.at(x, y);
        }
      const auto out = corr_angle(slice, cfg);
      std::map<int, int> hist;
      for (double v : out) ++hist[grid_index(cfg, v)];
      const auto mode = std::max_element(hist.begin(), hist.end(),
                                         [](auto& a, auto& b) { return a.second < b.second; });
      CAPTURE(s);
      CHECK(mode->second >= static_cast<int>(0.95 * out.size()));
      implied.push_back(std::tan(grid[mode->first]));

      const auto flipped = corr_angle(mirrored, cfg);
      std::map<int, int> fh;
      for (double v : flipped) ++fh[grid_index(cfg, v)];
      const int fmode = std::max_element(fh.begin(), fh.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
      // Mirror about pi/2 is index k -> 12 - k.
      CHECK(std::abs(fmode - (12 - mode->first)) <= 1);

      double mean = 0.0, ss = 0.0;
      for (double v : out) mean += v / static_cast<double>(out.size());
      for (double v : out) ss += (v - mean) * (v - mean);
      stripe_sd = std::max(stripe_sd, std::sqrt(ss / static_cast<double>(out.size() - 1)));
    }
    for (std::size_t i = 1; i < implied.size(); ++i) CHECK(implied[i] > implied[i - 1]);

    // White noise: far more angle scatter than any stripe.
    const auto noise = corr_angle(testutil::random_image(200, 128, 77, 0.0, 255.0, false), cfg);
    double mean = 0.0, ss = 0.0;
    for (double v : noise) mean += v / static_cast<double>(noise.size());
    for (double v : noise) ss += (v - mean) * (v - mean);
    CHECK(std::sqrt(ss / static_cast<double>(noise.size() - 1)) > 5 * stripe_sd);
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "stripescan/error.hpp"
#include "stripescan/eval.hpp"

using namespace stripescan;

namespace {

std::vector<Label> to_labels(const std::vector<int>& v) {
  std::vector<Label> out;
  for (int x : v) out.push_back(x ? Label::kArtifact : Label::kClean);
  return out;
}

// Random set with both classes; coarse scores make ties common.
void random_set(std::mt19937_64& rng, std::vector<double>& s, std::vector<int>& y) {
  const std::size_t n = 2 + rng() % 200;
  const bool coarse = rng() % 2 == 0;
  s.assign(n, 0.0);
  y.assign(n, 0);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = coarse ? std::round(u(rng)) : u(rng);
    y[i] = static_cast<int>(rng() % 2);
  }
  y[0] = 1;
  y[1] = 0;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("AUC equals the pairwise oracle on random sets") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> s;
      std::vector<int> y;
      random_set(rng, s, y);
      CHECK(std::fabs(roc_curve(s, to_labels(y)).auc - oracle::pairwise_auc(s, y)) <= 1e-9);
    }
  }

  TEST_CASE("AUC hand examples") {
    CHECK(roc_curve(std::vector<double>{0.1, 0.4, 0.35, 0.8}, to_labels({0, 0, 1, 1})).auc == doctest::Approx(0.75));
    CHECK(roc_curve(std::vector<double>{1, 2, 3, 4}, to_labels({0, 0, 1, 1})).auc == 1.0);
    CHECK(roc_curve(std::vector<double>{1, 2, 3, 4}, to_labels({1, 1, 0, 0})).auc == 0.0);
    CHECK(roc_curve(std::vector<double>{5, 5, 5, 5}, to_labels({1, 0, 1, 0})).auc == 0.5);
  }

  TEST_CASE("AUC is invariant under monotone transforms and flips under negation") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> s;
      std::vector<int> y;
      random_set(rng, s, y);
      const auto labels = to_labels(y);
      const double auc = roc_curve(s, labels).auc;
      std::vector<double> ex(s.size()), neg(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        ex[i] = std::exp(s[i] / 3.0) * 2.0 + 1.0;
        neg[i] = -s[i];
      }
      CHECK(roc_curve(ex, labels).auc == doctest::Approx(auc).epsilon(1e-12));
      CHECK(roc_curve(neg, labels).auc == doctest::Approx(1.0 - auc).epsilon(1e-12));
    }
  }

  TEST_CASE("ROC points form a monotone staircase from (0,0) to (1,1)") {
    std::mt19937_64 rng(8);
    std::vector<double> s;
    std::vector<int> y;
    random_set(rng, s, y);
    const auto c = roc_curve(s, to_labels(y));
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.front().tpr == 0.0);
    CHECK(std::isinf(c.points.front().threshold));
    CHECK(c.points.back().fpr == 1.0);
    CHECK(c.points.back().tpr == 1.0);
    const std::set<double> distinct(s.begin(), s.end());
    CHECK(c.points.size() == distinct.size() + 1);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
      CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
      CHECK(c.points[i].threshold < c.points[i - 1].threshold);
    }
  }

  TEST_CASE("ROC input errors") {
    auto code = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::kParseError;
    };
    CHECK(code([] { roc_curve(std::vector<double>{1, 2}, to_labels({1})); }) == ErrorCode::kLengthMismatch);
    CHECK(code([] { roc_curve(std::vector<double>{1, 2}, to_labels({1, 1})); }) == ErrorCode::kSingleClass);
    CHECK(code([] { roc_curve(std::vector<double>{1, NAN}, to_labels({1, 0})); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("grouped k-fold partitions groups evenly and deterministically") {
    std::vector<std::string> groups;
    for (int i = 0; i < 23; ++i)
      for (int r = 0; r < 1 + i % 4; ++r) groups.push_back("g" + std::to_string(i));
    const auto a = grouped_kfold(groups, 5, 3);
    CHECK(a.fold_of_group.size() == 23);
    std::vector<int> sizes(5, 0);
    for (const auto& [g, f] : a.fold_of_group) {
      REQUIRE(f >= 0);
      REQUIRE(f < 5);
      ++sizes[static_cast<std::size_t>(f)];
    }
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
    std::size_t total = 0;
    for (int f = 0; f < 5; ++f) total += a.groups_in(f).size();
    CHECK(total == 23);
    CHECK(grouped_kfold(groups, 5, 3).fold_of_group == a.fold_of_group);
    // Input order does not matter.
    auto shuffled = groups;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(grouped_kfold(shuffled, 5, 3).fold_of_group == a.fold_of_group);
    CHECK(grouped_kfold(groups, 5, 4).fold_of_group != a.fold_of_group);
  }

  TEST_CASE("k-fold errors") {
    try {
      grouped_kfold({"a", "b", "a"}, 3, 0);
      FAIL("expected TooFewGroups");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kTooFewGroups);
    }
    CHECK_THROWS_AS(grouped_kfold({"a", "b"}, 1, 0), Error);
    CHECK_THROWS_AS(leave_one_patient_out({"p", "p"}), Error);
  }

  TEST_CASE("leave-one-patient-out has one fold per patient in sorted order") {
    const auto a = leave_one_patient_out({"p3", "p1", "p2", "p1"});
    CHECK(a.k == 3);
    CHECK(a.group_level == GroupLevel::kPatient);
    CHECK(a.fold_of("p1") == 0);
    CHECK(a.fold_of("p2") == 1);
    CHECK(a.fold_of("p3") == 2);
    CHECK_THROWS_AS(a.fold_of("p9"), Error);
  }

  TEST_CASE("fold aggregation") {
    std::vector<FoldScores> folds{
        {{0.9, 0.1, 0.8, 0.2}, to_labels({1, 0, 1, 0})},  // AUC 1
        {{0.9, 0.1, 0.1, 0.9}, to_labels({1, 0, 1, 0})},  // AUC 0.5
        {{0.3, 0.4}, to_labels({0, 0})},                  // single class
    };
    const auto agg = aggregate_folds(folds);
    REQUIRE(agg.fold_auc.size() == 3);
    CHECK(*agg.fold_auc[0] == 1.0);
    CHECK(*agg.fold_auc[1] == 0.5);
    CHECK_FALSE(agg.fold_auc[2].has_value());
    CHECK(agg.skipped_folds == std::vector<int>{2});
    CHECK(agg.mean_auc == 0.75);
    CHECK(agg.std_auc == doctest::Approx(std::sqrt(0.125)));
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& f : folds) {
      s.insert(s.end(), f.scores.begin(), f.scores.end());
      for (auto l : f.labels) y.push_back(l == Label::kArtifact);
    }
    CHECK(agg.pooled.auc == doctest::Approx(oracle::pairwise_auc(s, y)).epsilon(1e-12));
    try {
      aggregate_folds({folds[2]});
      FAIL("expected NoValidFold");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNoValidFold);
    }
  }

  TEST_CASE("vertical averaging of step curves") {
    const auto perfect = roc_curve(std::vector<double>{1, 2}, to_labels({0, 1}));
    const auto worst = roc_curve(std::vector<double>{2, 1}, to_labels({0, 1}));
    CHECK(tpr_at(perfect, 0.0) == 1.0);
    CHECK(tpr_at(worst, 0.5) == 0.0);
    CHECK(tpr_at(worst, 1.0) == 1.0);
    const auto v = vertical_average({perfect, worst}, 101);
    REQUIRE(v.fpr.size() == 101);
    CHECK(v.fpr.front() == 0.0);
    CHECK(v.fpr.back() == 1.0);
    CHECK(v.tpr_mean[50] == 0.5);
    CHECK(v.tpr_std[50] == doctest::Approx(0.5));
    CHECK(v.tpr_mean[100] == 1.0);
    for (std::size_t i = 1; i < v.tpr_mean.size(); ++i) CHECK(v.tpr_mean[i] >= v.tpr_mean[i - 1]);
  }

  TEST_CASE("CSV, SVG and fingerprint output") {
    const auto c = roc_curve(std::vector<double>{0.2, 0.7}, to_labels({0, 1}));
    CHECK(format_roc_csv(c) == "threshold,fpr,tpr\ninf,0,0\n0.7,0,1\n0.2,1,1\n");
    const auto svg = render_roc_svg({{"a<b", c}});
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("a&lt;b") != std::string::npos);
    // FNV-1a 64 reference values.
    CHECK(fingerprint("") == "cbf29ce484222325");
    CHECK(fingerprint("a") == "af63dc4c8601ec8c");
  }

  TEST_CASE("worked fold and AUC examples") {
    std::vector<std::string> groups;
    for (int g = 0; g < 10; ++g) groups.push_back("img" + std::to_string(g));
    const auto folds = grouped_kfold(groups, 5, 123);
    for (int f = 0; f < 5; ++f) CHECK(folds.groups_in(f).size() == 2);

    const std::vector<double> two{0.9, 0.1};
    CHECK(roc_curve(two, to_labels({1, 0})).auc == 1.0);
    CHECK(roc_curve(two, to_labels({0, 1})).auc == 0.0);

    const FoldScores fold{{0.8, 0.3, 0.6, 0.6, 0.1}, to_labels({1, 0, 0, 1, 0})};
    const auto agg = aggregate_folds({fold, fold});
    const double single = roc_curve(fold.scores, fold.labels).auc;
    CHECK(agg.pooled.auc == doctest::Approx(single));
    CHECK(agg.mean_auc == single);
    CHECK(agg.std_auc == 0.0);
  }
}

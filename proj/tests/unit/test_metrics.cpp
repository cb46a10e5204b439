#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "evoroc/error.hpp"
#include "evoroc/metrics.hpp"
#include "evoroc/rng.hpp"

namespace evoroc {
namespace {

double pair_count_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double credit = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      credit += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return credit / pairs;
}

ScoredSet random_set(RngStream& rng, std::size_t max_n = 200) {
  ScoredSet set;
  const std::size_t n = 2 + rng.below(max_n - 1);
  // Coarse grid makes ties common; every set gets at least one of each label.
  const std::uint64_t levels = 1 + rng.below(40);
  for (std::size_t i = 0; i < n; ++i) {
    set.scores.push_back(rng.bernoulli(0.5) ? static_cast<double>(rng.below(levels)) : rng.normal());
    set.labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
  }
  set.labels[0] = 0;
  set.labels[1] = 1;
  for (std::size_t i = 0; i < n / 10; ++i) set.scores[rng.below(n)] = set.scores[rng.below(n)];
  return set;
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(ScoredSet{{0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}}), 1.0);
  EXPECT_EQ(auc(ScoredSet{{0.3, 0.3, 0.3, 0.3, 0.3}, {0, 1, 0, 1, 1}}), 0.5);
  EXPECT_EQ(auc(ScoredSet{{0.1, 0.4, 0.4, 0.8}, {0, 0, 1, 1}}), 0.875);
  EXPECT_EQ(pair_count_auc({0.1, 0.4, 0.4, 0.8}, {0, 0, 1, 1}), 0.875);
}

TEST(Auc, SingleClassIsUndefined) {
  try {
    auc(ScoredSet{{0.1, 0.2}, {1, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAucUndefined);
    EXPECT_NE(std::string(e.what()).find("AUC undefined"), std::string::npos);
  }
  EXPECT_THROW(roc_curve(ScoredSet{{0.1, 0.2}, {0, 0}}), Error);
  EXPECT_THROW(auc(ScoredSet{{0.1, 0.2}, {0}}), Error);
  EXPECT_THROW(auc(ScoredSet{{0.1, 0.2}, {0, 2}}), Error);
}

TEST(Auc, MatchesPairCountOracle) {
  RngStream rng(1);
  for (int t = 0; t < 1000; ++t) {
    const ScoredSet s = random_set(rng);
    EXPECT_NEAR(auc(s), pair_count_auc(s.scores, s.labels), 1e-12) << "set " << t;
  }
}

TEST(Auc, ComplementMonotoneAndPermutationInvariance) {
  RngStream rng(2);
  for (int t = 0; t < 200; ++t) {
    ScoredSet s = random_set(rng);
    const double a = auc(s);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    ScoredSet neg = s, mono = s;
    for (double& v : neg.scores) v = -v;
    for (double& v : mono.scores) v = std::exp(v / 4) * 3 + 1;
    EXPECT_NEAR(auc(neg), 1.0 - a, 1e-12);
    EXPECT_EQ(auc(mono), a);
    for (std::size_t i = s.scores.size(); i > 1; --i) {
      const std::size_t j = rng.below(i);
      std::swap(s.scores[i - 1], s.scores[j]);
      std::swap(s.labels[i - 1], s.labels[j]);
    }
    EXPECT_EQ(auc(s), a);
  }
}

TEST(Roc, EndpointsMonotonicityAndArea) {
  RngStream rng(3);
  for (int t = 0; t < 100; ++t) {
    const ScoredSet s = random_set(rng);
    const RocCurve c = roc_curve(s);
    ASSERT_GE(c.points.size(), 2u);
    EXPECT_EQ(c.points.front().fpr, 0.0);
    EXPECT_EQ(c.points.front().tpr, 0.0);
    EXPECT_EQ(c.points.front().threshold, std::numeric_limits<double>::infinity());
    EXPECT_EQ(c.points.back().fpr, 1.0);
    EXPECT_EQ(c.points.back().tpr, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
      EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
      EXPECT_LT(c.points[i].threshold, c.points[i - 1].threshold);
    }
    std::vector<double> distinct = s.scores;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    EXPECT_EQ(c.points.size(), distinct.size() + 1);
    EXPECT_NEAR(trapezoid_area(c), auc(s), 1e-12);
  }
}

TEST(Roc, PerfectClassifierHasTopLeftCorner) {
  const RocCurve c = roc_curve(ScoredSet{{0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}});
  bool corner = false;
  for (const RocPoint& p : c.points) corner |= p.fpr == 0.0 && p.tpr == 1.0;
  EXPECT_TRUE(corner);
}

TEST(Roc, CsvFormat) {
  const RocCurve c = roc_curve(ScoredSet{{0.1, 0.4, 0.4, 0.8}, {0, 0, 1, 1}});
  EXPECT_EQ(roc_csv(c),
            "fpr,tpr,threshold\n"
            "0.000000,0.000000,inf\n"
            "0.000000,0.500000,0.800000\n"
            "0.500000,1.000000,0.400000\n"
            "1.000000,1.000000,0.100000\n");
}

}  // namespace
}  // namespace evoroc

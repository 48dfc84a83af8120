#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "eegrf/errors.hpp"
#include "eegrf/metrics.hpp"
#include "test_util.hpp"

namespace eegrf {
namespace {

double brute_force_auc(const std::vector<double>& s, const std::vector<bool>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

double brute_force_ap(const std::vector<bool>& rel) {
  double sum = 0.0;
  int hits = 0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (!rel[k]) continue;
    int above = 0;
    for (std::size_t j = 0; j <= k; ++j) above += rel[j];
    sum += static_cast<double>(above) / static_cast<double>(k + 1);
    ++hits;
  }
  return sum / hits;
}

TEST(RocAuc, WorkedExample) {
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.6};
  EXPECT_DOUBLE_EQ(roc_auc(s, {true, false, true, false}), 0.75);
}

TEST(RocAuc, Extremes) {
  const std::vector<double> s = {4, 3, 2, 1};
  EXPECT_EQ(roc_auc(s, {true, true, false, false}), 1.0);
  EXPECT_EQ(roc_auc(s, {false, false, true, true}), 0.0);
  const std::vector<double> flat(6, 0.3);
  EXPECT_EQ(roc_auc(flat, {true, false, true, false, false, true}), 0.5);
}

TEST(RocAuc, MatchesBruteForceExactly) {
  Xoshiro256 rng(40);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(499);
    const auto y = testing::random_labels(rng, n, rng.uniform());
    const auto s = rng.below(2) ? testing::tied_scores(rng, n, 1 + rng.below(10)) : testing::random_doubles(rng, n, -5, 5);
    ASSERT_EQ(roc_auc(s, y), brute_force_auc(s, y)) << "trial " << trial;
  }
}

TEST(RocAuc, InvariantUnderMonotoneTransform) {
  Xoshiro256 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(200);
    const auto y = testing::random_labels(rng, n, 0.3);
    const auto s = testing::tied_scores(rng, n, 20);
    std::vector<double> t(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = std::exp(3.0 * s[i]) - 7.0;
      neg[i] = -s[i];
    }
    ASSERT_EQ(roc_auc(s, y), roc_auc(t, y));
    const auto u = testing::random_doubles(rng, n, 0, 1);  // no ties
    std::vector<double> nu(n);
    for (std::size_t i = 0; i < n; ++i) nu[i] = -u[i];
    ASSERT_NEAR(roc_auc(u, y) + roc_auc(nu, y), 1.0, 1e-12);
  }
}

TEST(RocAuc, Errors) {
  const std::vector<double> s = {1, 2, 3};
  EXPECT_THROW(roc_auc(s, {true, true, true}), UndefinedMetricError);
  EXPECT_THROW(roc_auc(s, {false, false, false}), UndefinedMetricError);
  EXPECT_THROW(roc_auc(s, {true, false}), PreconditionError);
  const std::vector<double> nan = {1, std::nan(""), 3};
  EXPECT_THROW(roc_auc(nan, {true, false, true}), DataError);
}

TEST(RocCurve, StaircaseAndArea) {
  Xoshiro256 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(300);
    const auto y = testing::random_labels(rng, n, rng.uniform());
    const auto s = rng.below(2) ? testing::tied_scores(rng, n, 1 + rng.below(8)) : testing::random_doubles(rng, n, 0, 1);
    const auto curve = roc_curve(s, y);
    ASSERT_EQ(curve.front().fpr, 0.0);
    ASSERT_EQ(curve.front().tpr, 0.0);
    ASSERT_TRUE(std::isinf(curve.front().threshold));
    ASSERT_EQ(curve.back().fpr, 1.0);
    ASSERT_EQ(curve.back().tpr, 1.0);
    std::vector<double> distinct = s;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    ASSERT_EQ(curve.size(), distinct.size() + 1);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      ASSERT_GE(curve[i].fpr, curve[i - 1].fpr);
      ASSERT_GE(curve[i].tpr, curve[i - 1].tpr);
      ASSERT_LT(curve[i].threshold, curve[i - 1].threshold);
    }
    ASSERT_NEAR(trapezoid_area(curve), roc_auc(s, y), 1e-12);
  }
}

TEST(RocCurve, PerfectAndReversedCorners) {
  const std::vector<double> s = {4, 3, 2, 1};
  const auto perfect = roc_curve(s, {true, true, false, false});
  EXPECT_TRUE(std::any_of(perfect.begin(), perfect.end(), [](const RocPoint& p) { return p.fpr == 0.0 && p.tpr == 1.0; }));
  const auto reversed = roc_curve(s, {false, false, true, true});
  EXPECT_TRUE(std::any_of(reversed.begin(), reversed.end(), [](const RocPoint& p) { return p.fpr == 1.0 && p.tpr == 0.0; }));
}

TEST(AveragePrecision, WorkedExamples) {
  EXPECT_NEAR(average_precision(std::vector<bool>{true, false, true, false}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(average_precision(std::vector<bool>{true, true, false, false, false}), 1.0);
  const Ranking r{"q", {{"a", 0.3}, {"b", 0.2}, {"c", std::nullopt}, {"d", 0.0}}};
  EXPECT_NEAR(average_precision(r, {"a", "c"}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_NEAR(average_precision(r, {"d"}), 0.25, 1e-15);
}

TEST(AveragePrecision, MatchesBruteForce) {
  Xoshiro256 rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(400);
    std::vector<bool> rel(n);
    for (std::size_t i = 0; i < n; ++i) rel[i] = rng.uniform() < 0.1;
    rel[rng.below(n)] = true;
    ASSERT_EQ(average_precision(rel), brute_force_ap(rel));
    // Same via the ranking overload, after renaming non-relevant ids.
    Ranking r;
    std::unordered_set<std::string> relevant;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = (rel[i] ? "r" : "x" + std::to_string(trial)) + std::to_string(i);
      r.entries.push_back({id, std::nullopt});
      if (rel[i]) relevant.insert(id);
    }
    ASSERT_EQ(average_precision(r, relevant), brute_force_ap(rel));
  }
}

TEST(AveragePrecision, Errors) {
  EXPECT_THROW(average_precision(std::vector<bool>{false, false}), UndefinedMetricError);
  const Ranking r{"q", {{"a", 1.0}, {"b", 0.5}}};
  EXPECT_THROW(average_precision(r, {}), UndefinedMetricError);
  EXPECT_THROW(average_precision(r, {"a", "zz"}), DataError);
}

TEST(MeanAp, ValuesAndOrderInvariance) {
  const std::vector<double> three = {1.0, 0.0, 0.5};
  EXPECT_EQ(mean_ap(three), 0.5);
  const std::vector<double> one = {0.3141};
  EXPECT_EQ(mean_ap(one), 0.3141);
  Xoshiro256 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    auto aps = testing::random_doubles(rng, 1 + rng.below(30), 0, 1);
    const double m = mean_ap(aps);
    fisher_yates_shuffle(std::span<double>(aps), rng);
    ASSERT_EQ(mean_ap(aps), m);  // bitwise
  }
  EXPECT_THROW(mean_ap(std::vector<double>{}), UndefinedMetricError);
}

// Reference values: scipy.stats.ttest_ind(a, b, equal_var=False).
TEST(WelchTTest, FrozenReferenceValues) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> b = {2, 3, 4, 5, 6};
  const auto r = welch_t_test(a, b);
  EXPECT_NEAR(r.t, -1.0, 1e-12);
  EXPECT_NEAR(r.df, 8.0, 1e-12);
  EXPECT_NEAR(r.p, 0.34659350708733416, 1e-6);

  const std::vector<double> c = {1.1, 2.5, 2.9, 4.2, 5.0, 6.1};
  const std::vector<double> d = {3.3, 3.9, 4.1, 4.4, 5.9, 6.6, 7.0};
  const auto r2 = welch_t_test(c, d);
  EXPECT_NEAR(r2.t, -1.5122270964364897, 1e-9);
  EXPECT_NEAR(r2.p, 0.16275630661906554, 1e-6);
}

TEST(WelchTTest, SymmetryAndIdentity) {
  Xoshiro256 rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = testing::random_doubles(rng, 2 + rng.below(20), -1, 3);
    const auto b = testing::random_doubles(rng, 2 + rng.below(20), 0, 2);
    const auto ab = welch_t_test(a, b);
    const auto ba = welch_t_test(b, a);
    ASSERT_DOUBLE_EQ(ab.t, -ba.t);
    ASSERT_DOUBLE_EQ(ab.p, ba.p);
    ASSERT_GE(ab.p, 0.0);
    ASSERT_LE(ab.p, 1.0);
    const auto aa = welch_t_test(a, a);
    ASSERT_EQ(aa.t, 0.0);
    ASSERT_NEAR(aa.p, 1.0, 1e-12);
  }
}

TEST(WelchTTest, Errors) {
  EXPECT_THROW(welch_t_test(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), PreconditionError);
  EXPECT_THROW(welch_t_test(std::vector<double>{2.0, 2.0}, std::vector<double>{1.0, 2.0}), PreconditionError);
}

TEST(Moments, MeanAndVariance) {
  const std::vector<double> v = {2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_EQ(mean(v), 5.0);
  EXPECT_NEAR(sample_variance(v), 32.0 / 7.0, 1e-15);
  EXPECT_THROW(mean(std::vector<double>{}), PreconditionError);
  EXPECT_THROW(sample_variance(std::vector<double>{1.0}), PreconditionError);
}

}  // namespace
}  // namespace eegrf

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "caseflow/metrics.hpp"
#include "caseflow/resampling.hpp"
#include "oracles.hpp"

using namespace caseflow;

namespace {

std::vector<double> scores_of(std::mt19937_64& g, std::size_t n) {
  std::vector<double> s(n);
  std::normal_distribution<double> z;
  for (auto& v : s) v = z(g);
  return s;
}

std::vector<int> labels_of(std::mt19937_64& g, std::size_t n) {
  std::vector<int> y(n);
  for (auto& v : y) v = std::bernoulli_distribution(0.4)(g);
  y[0] = 1;
  y[1] = 0;
  return y;
}

}  // namespace

TEST(Roc, PerfectAndAllTied) {
  const auto r = roc_curve(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0});
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_EQ(r.points[1].fpr, 0.0);
  EXPECT_EQ(r.points[1].tpr, 1.0);
  EXPECT_EQ(r.points[2].fpr, 1.0);

  const auto t = roc_curve(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1});
  ASSERT_EQ(t.points.size(), 2u);
  EXPECT_EQ(t.points[1].fpr, 1.0);
  EXPECT_EQ(t.points[1].tpr, 1.0);
}

TEST(Roc, HandEnumeratedSweep) {
  const std::vector<double> s{0.95, 0.9, 0.9, 0.8, 0.7, 0.6, 0.6, 0.4, 0.3, 0.1};
  const std::vector<int> y{1, 1, 0, 1, 0, 1, 0, 0, 1, 0};
  // 5 positives, 5 negatives; one point per distinct score.
  const std::vector<std::array<double, 3>> want{{0, 0, INFINITY}, {0, .2, .95}, {.2, .4, .9}, {.2, .6, .8},
                                                {.4, .6, .7},     {.6, .8, .6}, {.8, .8, .4}, {.8, 1, .3},
                                                {1, 1, .1}};
  const auto r = roc_curve(s, y);
  ASSERT_EQ(r.points.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_NEAR(r.points[i].fpr, want[i][0], 1e-15);
    EXPECT_NEAR(r.points[i].tpr, want[i][1], 1e-15);
    EXPECT_EQ(r.points[i].threshold, want[i][2]);
  }
  std::ostringstream csv;
  write_roc_csv(csv, r);
  EXPECT_EQ(csv.str().substr(0, 27), "fpr,tpr,threshold\n0,0,inf\n0");
}

TEST(Roc, CurveIsMonotoneFromOriginToOne) {
  std::mt19937_64 g(1);
  const auto s = scores_of(g, 300);
  const auto y = labels_of(g, 300);
  const auto r = roc_curve(s, y);
  EXPECT_EQ(r.points.front().fpr, 0.0);
  EXPECT_EQ(r.points.back().tpr, 1.0);
  EXPECT_EQ(r.points.back().fpr, 1.0);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    EXPECT_GE(r.points[i].fpr, r.points[i - 1].fpr);
    EXPECT_GE(r.points[i].tpr, r.points[i - 1].tpr);
  }
}

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.9, 0.8, 0.7, 0.1}, std::vector<int>{1, 0, 1, 0}), 0.75);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{5, 5, 5, 5}, std::vector<int>{1, 0, 1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{2, 3, 0, 1}, std::vector<int>{1, 1, 0, 0}), 1.0);
}

TEST(Auc, Errors) {
  EXPECT_THROW(auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), Error);
  EXPECT_THROW(auc(std::vector<double>{1, 2}, std::vector<int>{1}), Error);
  EXPECT_THROW(roc_curve(std::vector<double>{1, 2}, std::vector<int>{0, 0}), Error);
}

TEST(Auc, AgreesWithOraclesAndComplement) {
  std::mt19937_64 g(2);
  for (int t = 0; t < 100; ++t) {
    auto s = scores_of(g, 40);
    const auto y = labels_of(g, 40);
    const double a = auc(s, y);
    EXPECT_NEAR(a, oracle::pair_count_auc(s, y), 1e-12);
    EXPECT_NEAR(a, trapezoid_area(roc_curve(s, y)), 1e-12);
    for (auto& v : s) v = -v;
    EXPECT_NEAR(a + auc(s, y), 1.0, 1e-12);
  }
}

TEST(DeLong, PerfectSeparation) {
  const auto e = delong_ci(std::vector<double>{3, 4, 1, 2}, std::vector<int>{1, 1, 0, 0});
  EXPECT_EQ(e.auc, 1.0);
  EXPECT_EQ(e.variance, 0.0);
  EXPECT_EQ(e.ci_low, 1.0);
  EXPECT_EQ(e.ci_high, 1.0);
  EXPECT_EQ(e.n_pos, 2u);
  EXPECT_THROW(delong_ci(std::vector<double>{1, 2, 3}, std::vector<int>{1, 0, 0}), Error);
}

TEST(DeLong, HandComputedVariance) {
  // Positives {0.9, 0.7}, negatives {0.8, 0.1}. V10 = {1, 0.5}, V01 = {0.5, 1}.
  const auto e = delong_ci(std::vector<double>{0.9, 0.8, 0.7, 0.1}, std::vector<int>{1, 0, 1, 0});
  EXPECT_DOUBLE_EQ(e.auc, 0.75);
  EXPECT_NEAR(e.variance, 0.125 / 2 + 0.125 / 2, 1e-15);
  EXPECT_NEAR(e.ci_high, 1.0, 0.0);  // clipped
  EXPECT_NEAR(e.ci_low, 0.75 - 1.959963984540054 * std::sqrt(0.125), 1e-9);
  EXPECT_LE(e.ci_low, e.auc);
}

TEST(DeLong, MatchesBootstrapPercentileInterval) {
  std::mt19937_64 g(3);
  std::vector<double> s;
  std::vector<int> y;
  oracle::binormal_sample(g, 100, 100, 1.0, s, y);
  const auto e = delong_ci(s, y);
  std::vector<double> boot;
  std::uniform_int_distribution<std::size_t> pick_pos(0, 99), pick_neg(100, 199);
  for (int b = 0; b < 2000; ++b) {
    std::vector<double> bs;
    std::vector<int> by;
    for (int i = 0; i < 100; ++i) {
      bs.push_back(s[pick_pos(g)]);
      by.push_back(1);
    }
    for (int i = 0; i < 100; ++i) {
      bs.push_back(s[pick_neg(g)]);
      by.push_back(0);
    }
    boot.push_back(auc(bs, by));
  }
  std::sort(boot.begin(), boot.end());
  EXPECT_NEAR(e.ci_low, boot[49], 0.02);
  EXPECT_NEAR(e.ci_high, boot[1949], 0.02);
}

TEST(DeLong, InvariantUnderMonotoneTransform) {
  std::mt19937_64 g(4);
  const auto s = scores_of(g, 150);
  const auto y = labels_of(g, 150);
  std::vector<double> t(s);
  for (auto& v : t) v = std::exp(3 * v) + 7;
  const auto a = delong_ci(s, y), b = delong_ci(t, y);
  EXPECT_NEAR(a.variance, b.variance, 1e-15);
  EXPECT_EQ(a.auc, b.auc);
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-9);
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-12);
  EXPECT_NEAR(normal_quantile(1e-6), -4.753424308822899, 1e-9);
  EXPECT_EQ(normal_quantile(0.0), -INFINITY);
  EXPECT_EQ(normal_quantile(1.0), INFINITY);
  EXPECT_THROW(normal_quantile(1.5), Error);
  EXPECT_THROW(normal_quantile(std::nan("")), Error);
}

TEST(Spearman, Examples) {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 1, 4, 3}, r{4, 3, 2, 1};
  EXPECT_NEAR(spearman(a, a), 1.0, 1e-15);
  EXPECT_NEAR(spearman(a, r), -1.0, 1e-15);
  EXPECT_NEAR(spearman(a, b), 0.6, 1e-15);
  EXPECT_THROW(spearman(a, std::vector<double>{1, 2}), Error);
  EXPECT_THROW(spearman(a, std::vector<double>{2, 2, 2, 2}), Error);
}

TEST(Spearman, TiesUseAverageRanks) {
  const std::vector<double> x{1, 2, 2, 3};
  EXPECT_EQ(average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4}));
  EXPECT_NEAR(spearman(x, std::vector<double>{1, 2, 3, 4}), pearson(std::vector<double>{1, 2.5, 2.5, 4}, std::vector<double>{1, 2, 3, 4}), 1e-15);
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 g(5);
  const auto a = scores_of(g, 80), b = scores_of(g, 80);
  std::vector<double> ta(a), tb(b);
  for (auto& v : ta) v = std::atan(v);
  for (auto& v : tb) v = v * v * v - 4;
  EXPECT_NEAR(spearman(a, b), spearman(ta, tb), 1e-12);
}

TEST(CorrelationMatrix, Shapes) {
  const std::vector<double> v{1, 3, 2};
  EXPECT_EQ(correlation_matrix({v}), (std::vector<std::vector<double>>{{1.0}}));
  const auto m = correlation_matrix({v, v});
  for (const auto& row : m)
    for (double x : row) EXPECT_NEAR(x, 1.0, 1e-15);
  std::mt19937_64 g(6);
  const auto k = correlation_matrix({scores_of(g, 30), scores_of(g, 30), scores_of(g, 30)});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(k[i][j], k[j][i]);
  EXPECT_THROW(correlation_matrix({v, {1, 2}}), Error);
}

TEST(Resample, ConstantPopulationSitsAtFifty) {
  const std::vector<double> pop(50, 2.0);
  const std::vector<std::size_t> obs{1, 2, 3};
  const auto r = resample_test(pop, obs, {200, 1, false});
  EXPECT_EQ(r.percentile, 50.0);
  EXPECT_EQ(r.null_means.size(), 200u);
  EXPECT_LE(r.p_two_sided, 1.0);
}

TEST(Resample, PlantedLowGroupAndPValueFloor) {
  std::mt19937_64 g(7);
  const auto pop = scores_of(g, 5000);
  std::vector<std::size_t> idx(pop.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return pop[a] < pop[b]; });
  idx.resize(700);
  const auto r = resample_test(pop, idx, {1000, 2, false});
  EXPECT_EQ(r.percentile, 0.0);
  EXPECT_NEAR(r.p_two_sided, 1.0 / 1001.0, 1e-15);
}

TEST(Resample, DeterministicAndOrderIndependentOfIndices) {
  std::mt19937_64 g(8);
  const auto pop = scores_of(g, 100);
  const std::vector<std::size_t> obs{5, 9, 40};
  const auto a = resample_test(pop, obs, {300, 11, false});
  const auto b = resample_test(pop, obs, {300, 11, false});
  EXPECT_EQ(a.null_means, b.null_means);
  EXPECT_NE(resample_test(pop, obs, {300, 12, false}).null_means, a.null_means);
  // Percentile follows the midpoint rule on the stored null means.
  double below = 0, eq = 0;
  for (double m : a.null_means) {
    below += m < a.observed_mean;
    eq += m == a.observed_mean;
  }
  EXPECT_DOUBLE_EQ(a.percentile, 100 * (below + eq / 2) / 300);
}

TEST(Resample, ExcludeObservedDrawsOnlyFromOthers) {
  std::vector<double> pop(20, 0.0);
  const std::vector<std::size_t> obs{0, 1};
  pop[0] = pop[1] = 100.0;
  const auto r = resample_test(pop, obs, {200, 3, true});
  for (double m : r.null_means) EXPECT_EQ(m, 0.0);
  EXPECT_EQ(r.percentile, 100.0);
}

TEST(Resample, Errors) {
  const std::vector<double> pop{1, 2, 3};
  EXPECT_THROW(resample_test(pop, std::vector<std::size_t>{}, {}), Error);
  EXPECT_THROW(resample_test(pop, std::vector<std::size_t>{0, 1, 2}, {}), Error);
  EXPECT_THROW(resample_test(pop, std::vector<std::size_t>{0, 7}, {}), Error);
  EXPECT_THROW(resample_test(pop, std::vector<std::size_t>{0, 0}, {}), Error);
  try {
    resample_test(pop, std::vector<std::size_t>{0, 1, 2}, {});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GroupTooLarge);
  }
}

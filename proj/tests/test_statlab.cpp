#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dialrel/rng.hpp"
#include "dialrel/statlab.hpp"
#include "support.hpp"

using namespace dialrel;
using testsupport::oracle_pearson;
using testsupport::oracle_ranks;

TEST(Pearson, ExactLinear) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_DOUBLE_EQ(pearson(x, std::vector<double>{2, 4, 6}), 1.0);
  EXPECT_DOUBLE_EQ(pearson(x, std::vector<double>{3, 2, 1}), -1.0);
}

TEST(Pearson, MatchesTwoPassOracle) {
  Engine eng(7);
  std::vector<double> x(200), y(200);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = standard_normal(eng) * 10 + 3;
    y[i] = 0.3 * x[i] + standard_normal(eng);
  }
  const double want = static_cast<double>(oracle_pearson(x, y));
  EXPECT_NEAR(pearson(x, y), want, 1e-12 * std::abs(want));
}

TEST(Pearson, ZeroVarianceIsAnError) {
  EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), std::domain_error);
  EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(Pearson, AffineEquivariance) {
  Engine eng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(30), y(30);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = standard_normal(eng);
      y[i] = x[i] + standard_normal(eng);
    }
    const double a = standard_normal(eng) * 5, c = standard_normal(eng) * 5;
    std::vector<double> xa(x), yc(y);
    for (auto& v : xa) v = a * v + 1.5;
    for (auto& v : yc) v = c * v - 2.0;
    const double sign = (a * c > 0) ? 1.0 : -1.0;
    EXPECT_NEAR(pearson(xa, yc), sign * pearson(x, y), 1e-12);
  }
}

TEST(Ranks, AverageTies) {
  const std::vector<double> x{1, 2, 2, 4};
  EXPECT_EQ(average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Spearman, TiedExampleMatchesRankThenPearson) {
  const std::vector<double> x{1, 2, 2, 4};
  const std::vector<double> y{1, 3, 2, 2};
  const double want = static_cast<double>(oracle_pearson(oracle_ranks(x), oracle_ranks(y)));
  EXPECT_NEAR(spearman(x, y), want, 1e-15);
}

TEST(Spearman, MonotoneAndReversal) {
  std::vector<double> x{0.3, -1, 4, 2.5, 9};
  std::vector<double> y;
  for (double v : x) y.push_back(std::exp(v));
  EXPECT_DOUBLE_EQ(spearman(x, y), 1.0);
  for (auto& v : y) v = -v;
  EXPECT_DOUBLE_EQ(spearman(x, y), -1.0);
}

TEST(Spearman, InvariantUnderIncreasingTransforms) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto x = testsupport::tied_vector(40, 0.3, seed);
    const auto y = testsupport::tied_vector(40, 0.3, seed + 1000);
    std::vector<double> gx, hy;
    for (double v : x) gx.push_back(std::exp(v) + 2.0);
    for (double v : y) hy.push_back(v * v * v);
    EXPECT_NEAR(spearman(gx, hy), spearman(x, y), 1e-12);
  }
}

TEST(PermPvalue, PerfectCorrelationHasMinimalP) {
  std::vector<double> x(100);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) * 0.37 + 1;
  const double p = perm_pvalue(x, x, Statistic::spearman, 10000, 3);
  EXPECT_DOUBLE_EQ(p, 1.0 / 10001.0);
  EXPECT_LT(p, 0.01);
}

TEST(PermPvalue, TooFewPermutationsIsAnError) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_THROW(perm_pvalue(x, x, Statistic::pearson, 10, 0), std::invalid_argument);
}

TEST(PermPvalue, SymmetricInArguments) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = testsupport::tied_vector(25, 0.3, seed);
    const auto y = testsupport::tied_vector(25, 0.3, seed + 99);
    for (auto stat : {Statistic::spearman, Statistic::pearson}) {
      EXPECT_DOUBLE_EQ(perm_pvalue(x, y, stat, 1000, seed), perm_pvalue(y, x, stat, 1000, seed));
    }
  }
}

TEST(PermPvalue, Deterministic) {
  const auto x = testsupport::tied_vector(30, 0.3, 1);
  const auto y = testsupport::tied_vector(30, 0.3, 2);
  EXPECT_EQ(perm_pvalue(x, y, Statistic::pearson, 2000, 5), perm_pvalue(x, y, Statistic::pearson, 2000, 5));
}

TEST(Markers, QuantifierSemantics) {
  EXPECT_EQ(significance_marker(std::vector<double>{0.005, 0.02, 0.001}), "‡");
  EXPECT_EQ(significance_marker(std::vector<double>{0.005, 0.002, 0.001}), "*");
  EXPECT_EQ(significance_marker(std::vector<double>{0.5, 0.02, 0.011}), "");
  EXPECT_EQ(significance_marker(std::vector<double>{0.01}), "");
}

CorrelationReport run(double s, double p, double pv) {
  CorrelationReport r;
  r.metric = "IDK";
  r.dataset = "HUMOD";
  r.split = "test";
  r.n = 1000;
  r.spearman = s;
  r.pearson = p;
  r.p_spearman = r.p_pearson = pv;
  r.run_p_spearman = r.run_p_pearson = {pv};
  return r;
}

TEST(Aggregate, MeanAndPopulationStd) {
  const std::vector<CorrelationReport> runs{run(0.32, 0.3, 0.001), run(0.36, 0.3, 0.02), run(0.31, 0.3, 0.001)};
  const auto agg = aggregate_runs(runs);
  EXPECT_NEAR(agg.spearman, 0.33, 1e-12);
  const double m = 0.33;
  const double want = std::sqrt(((0.32 - m) * (0.32 - m) + (0.36 - m) * (0.36 - m) + (0.31 - m) * (0.31 - m)) / 3);
  EXPECT_NEAR(agg.spearman_std, want, 1e-12);
  EXPECT_NEAR(agg.pearson_std, 0.0, 1e-15);
  EXPECT_EQ(agg.runs, 3u);
  EXPECT_EQ(agg.marker_spearman, "‡");
}

TEST(Aggregate, IdenticalRunsHaveZeroStd) {
  const std::vector<CorrelationReport> runs(3, run(0.58, 0.58, 0.0001));
  const auto agg = aggregate_runs(runs);
  EXPECT_EQ(agg.spearman_std, 0.0);
  EXPECT_EQ(agg.marker_spearman, "*");
}

TEST(Aggregate, MixedKeysRejected) {
  auto other = run(0.1, 0.1, 0.5);
  other.dataset = "P_DD";
  const std::vector<CorrelationReport> runs{run(0.2, 0.2, 0.5), other};
  EXPECT_THROW(aggregate_runs(runs), std::invalid_argument);
}

TEST(Sensitivity, PublishedRows) {
  auto ratio = [](std::vector<double> v) {
    const std::vector<std::string> names{"H", "TC", "PDD", "FC", "FR"};
    std::map<std::string, double> m;
    for (std::size_t i = 0; i < v.size(); ++i) m[names[i]] = v[i];
    return sensitivity_ratio("m", m).ratio;
  };
  EXPECT_NEAR(ratio({0.58, 0.18, 0.53, 0.15, 0.24}), 3.9, 0.05);
  EXPECT_NEAR(ratio({0.33, 0.10, 0.62, 0.14, 0.22}), 6.2, 0.05);
  EXPECT_TRUE(std::isinf(ratio({0.61, 0.00, 0.70, 0.12, 0.15})));
  EXPECT_NEAR(ratio({-0.06, -0.08, -0.25, 0.17, 0.15}), -0.7, 0.05);
}

TEST(Sensitivity, OrderInvariant) {
  std::map<std::string, double> a{{"a", 0.5}, {"b", 0.1}, {"c", 0.3}};
  std::map<std::string, double> b{{"z", 0.3}, {"y", 0.5}, {"x", 0.1}};
  EXPECT_EQ(sensitivity_ratio("m", a).ratio, sensitivity_ratio("m", b).ratio);
}

TEST(ReportJson, RoundTrip) {
  auto r = aggregate_runs(std::vector<CorrelationReport>{run(0.5, 0.4, 0.001), run(0.52, 0.41, 0.003)});
  const auto back = report_from_json(report_to_json(r));
  EXPECT_EQ(back.spearman, r.spearman);
  EXPECT_EQ(back.pearson_std, r.pearson_std);
  EXPECT_EQ(back.run_p_pearson, r.run_p_pearson);
  EXPECT_EQ(back.marker_spearman, r.marker_spearman);
  EXPECT_EQ(back.runs, 2u);
}

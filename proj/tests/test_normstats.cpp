#include <gtest/gtest.h>

#include <random>

#include "finmeta/evalharness.hpp"
#include "finmeta/normstats.hpp"
#include "oracles.hpp"

using namespace finmeta;

TEST(NormalCdf, Values) {
  EXPECT_EQ(std_normal_cdf(0.0), 0.5);
  EXPECT_NEAR(std_normal_cdf(1.959964), 0.975, 1e-6);
  EXPECT_NEAR(std_normal_cdf(1.959964), oracle::normal_cdf(1.959964), 1e-9);
  EXPECT_NEAR(std_normal_cdf(-8.0), 6.22e-16, 5e-17);
  EXPECT_NEAR(std_normal_cdf(-8.0), oracle::normal_upper_tail_asymptotic(8.0), 1e-22);
}

TEST(NormalCdf, AgreesWithQuadrature) {
  for (double x = -5.0; x <= 5.0; x += 0.25) EXPECT_NEAR(std_normal_cdf(x), oracle::normal_cdf(x), 1e-12) << x;
}

TEST(NormalUpperTail, Values) {
  EXPECT_EQ(std_normal_upper_tail(0.0), 0.5);
  EXPECT_NEAR(std_normal_upper_tail(2.326348), 0.01, 1e-6);
  const double t10 = std_normal_upper_tail(10.0);
  EXPECT_NEAR(t10, 7.62e-24, 1e-25);
  EXPECT_NEAR(t10 / oracle::normal_upper_tail_asymptotic(10.0), 1.0, 1e-2);
}

TEST(NormalUpperTail, ConsistentWithCdf) {
  for (double x = 0.0; x <= 8.0; x += 0.01) {
    EXPECT_LT(std::abs(std_normal_upper_tail(x) - (1.0 - std_normal_cdf(x))), 1e-15) << x;
  }
}

TEST(NormalQuantile, Values) {
  EXPECT_EQ(std_normal_quantile(0.5), 0.0);
  EXPECT_NEAR(std_normal_quantile(0.95), 1.644854, 1e-5);
  EXPECT_NEAR(std_normal_quantile(0.975), 1.959964, 1e-5);
  for (double p : {0.001, 0.02, 0.3, 0.7, 0.95, 0.999}) {
    EXPECT_NEAR(std_normal_quantile(p), oracle::normal_quantile(p), 1e-9) << p;
  }
}

TEST(NormalQuantile, RoundTripGrid) {
  for (int i = -600; i <= 600; ++i) {
    const double x = i * 0.01;
    EXPECT_LT(std::abs(std_normal_quantile(std_normal_cdf(x)) - x), 1e-8) << x;
  }
}

TEST(NormalQuantile, UpperQuantileFiniteAtExtremes) {
  EXPECT_NEAR(std_normal_upper_quantile(0.05), 1.644854, 1e-5);
  EXPECT_TRUE(std::isfinite(std_normal_upper_quantile(1e-300)));
  EXPECT_GT(std_normal_upper_quantile(1e-300), 37.0);
  EXPECT_TRUE(std::isfinite(std_normal_upper_quantile(1.0 - 1e-16)));
}

TEST(NormalQuantile, RejectsClosedEnds) {
  EXPECT_THROW(std_normal_quantile(0.0), std::domain_error);
  EXPECT_THROW(std_normal_quantile(1.0), std::domain_error);
  EXPECT_THROW(std_normal_quantile(std::nan("")), std::domain_error);
}

TEST(ChiSquare1, MatchesTwoSidedNormal) {
  EXPECT_NEAR(chisq1_upper_tail(3.841459), 0.05, 1e-6);
  for (double z : {0.1, 1.0, 2.5, 6.0}) EXPECT_NEAR(chisq1_upper_tail(z * z), 2.0 * std_normal_upper_tail(z), 1e-15);
  EXPECT_EQ(chisq1_upper_tail(0.0), 1.0);
}

TEST(BhAdjust, Examples) {
  EXPECT_EQ(bh_adjust(std::vector<double>{0.03}), std::vector<double>{0.03});
  const auto adj = bh_adjust(std::vector<double>{0.01, 0.04, 0.03, 0.005});
  const std::vector<double> expected{0.02, 0.04, 0.04, 0.02};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(adj[i], expected[i], 1e-15);
  EXPECT_EQ(bh_adjust(std::vector<double>{1.0, 1.0, 1.0}), (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_TRUE(bh_adjust(std::vector<double>{}).empty());
}

TEST(BhAdjust, MatchesBruteForceOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 50);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution tie(0.2);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> p(len(rng));
    for (auto& x : p) x = u(rng);
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (tie(rng)) p[i] = p[i - 1];
    }
    const auto got = bh_adjust(p);
    const auto want = oracle::bh(p);
    ASSERT_EQ(got, want) << "rep " << rep;
  }
}

TEST(BhAdjust, MonotoneAndBounded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> p(1 + rep % 40);
    for (auto& x : p) x = u(rng) * u(rng);
    const auto adj = bh_adjust(p);
    ASSERT_EQ(adj.size(), p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_GE(adj[i], p[i]);
      EXPECT_LE(adj[i], 1.0);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[i] <= p[j]) EXPECT_LE(adj[i], adj[j]);
      }
    }
  }
}

TEST(BhAdjust, RejectsOutOfRange) {
  EXPECT_THROW(bh_adjust(std::vector<double>{0.5, 1.5}), std::domain_error);
  EXPECT_THROW(bh_adjust(std::vector<double>{-0.1}), std::domain_error);
}

TEST(KsUniform, Examples) {
  EXPECT_DOUBLE_EQ(ks_uniform_stat(std::vector<double>{0.5}), 0.5);
  EXPECT_DOUBLE_EQ(ks_uniform_stat(std::vector<double>{0.25, 0.5, 0.75}), 0.25);
  std::vector<double> grid(100);
  for (int i = 0; i < 100; ++i) grid[i] = (i + 0.5) / 100.0;
  EXPECT_NEAR(ks_uniform_stat(grid), 0.005, 1e-15);
  EXPECT_THROW(ks_uniform_stat(std::vector<double>{}), std::domain_error);
}

TEST(KsUniform, MatchesEcdfOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> p(1 + rep);
    for (auto& x : p) x = rep % 3 == 0 ? std::round(u(rng) * 10) / 10 : u(rng);
    EXPECT_NEAR(ks_uniform_stat(p), oracle::ks_uniform(p), 1e-15);
  }
}

TEST(SignedQuantile, IsStandardNormal) {
  EXPECT_LT(signed_quantile_ks(100000, 1), 0.006);
  EXPECT_EQ(signed_quantile_ks(1000, 9), signed_quantile_ks(1000, 9));
}

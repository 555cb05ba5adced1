#include <gtest/gtest.h>

#include <cmath>

#include "finmeta/simgen.hpp"

using namespace finmeta;

namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

Moments nb_moments(double mean, double dispersion, std::size_t n, std::uint64_t seed) {
  auto rng = make_stream(seed, 0, 99);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = static_cast<double>(sample_negative_binomial(rng, mean, dispersion));
    sum += x;
    sum_sq += x * x;
  }
  const double m = sum / static_cast<double>(n);
  return {m, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1)};
}

// Share of genes whose per-study naive fold-change signs disagree.
double conflicting_fraction(const SimConfig& cfg) {
  const auto truth = sample_truth(cfg, 0);
  const auto studies = simulate_counts(truth, cfg, 0);
  std::size_t conflicts = 0;
  for (std::size_t g = 0; g < cfg.n_genes; ++g) {
    bool up = false;
    bool down = false;
    for (const auto& s : studies) {
      double c = 0.0;
      double k = 0.0;
      const auto row = s.counts.row(g);
      for (std::size_t j = 0; j < row.size(); ++j) {
        (s.counts.conditions()[j] == Condition::Case ? c : k) += static_cast<double>(row[j]);
      }
      const double lfc = std::log2((c / s.counts.n_case() + 0.5) / (k / s.counts.n_control() + 0.5));
      (lfc >= 0 ? up : down) = true;
    }
    conflicts += up && down ? 1 : 0;
  }
  return static_cast<double>(conflicts) / static_cast<double>(cfg.n_genes);
}

}  // namespace

TEST(Table1Settings, Presets) {
  const auto s1 = table1_setting(1);
  EXPECT_EQ(s1.sigma, 0.15);
  ASSERT_EQ(s1.studies.size(), 3u);
  EXPECT_EQ(s1.studies[0].replicates_case, 10);
  EXPECT_EQ(s1.studies[0].replicates_control, 10);
  EXPECT_EQ(s1.studies[1].replicates_case, 15);
  EXPECT_EQ(s1.studies[1].replicates_control, 10);
  EXPECT_EQ(s1.studies[2].replicates_case, 12);
  EXPECT_EQ(s1.studies[2].replicates_control, 16);

  const auto s2 = table1_setting(2);
  ASSERT_EQ(s2.studies.size(), 5u);
  EXPECT_EQ(s2.studies[3].replicates_case, 14);
  EXPECT_EQ(s2.studies[3].replicates_control, 12);
  EXPECT_EQ(s2.studies[4].replicates_case, 20);
  EXPECT_EQ(s2.studies[4].replicates_control, 20);

  EXPECT_EQ(table1_setting(3).sigma, 0.5);
  EXPECT_EQ(table1_setting(3).studies.size(), 3u);
  EXPECT_EQ(table1_setting(4).sigma, 0.5);
  EXPECT_EQ(table1_setting(4).studies.size(), 5u);
  EXPECT_THROW(table1_setting(0), std::invalid_argument);
  EXPECT_THROW(table1_setting(5), std::invalid_argument);
}

TEST(SimConfig, Validation) {
  auto cfg = table1_setting(1);
  EXPECT_NO_THROW(cfg.validate());
  cfg.sigma = -0.1;
  EXPECT_THROW(cfg.validate(), std::domain_error);
  cfg = table1_setting(1);
  cfg.prop_de = 1.0;
  EXPECT_THROW(cfg.validate(), std::domain_error);
  cfg = table1_setting(1);
  cfg.fc_min = -1.0;
  EXPECT_THROW(cfg.validate(), std::domain_error);
  cfg = table1_setting(1);
  cfg.studies.clear();
  EXPECT_THROW(cfg.validate(), std::domain_error);
}

TEST(SampleTruth, DeShareAndInvariants) {
  const auto cfg = table1_setting(1);
  const auto truth = sample_truth(cfg, 0);
  ASSERT_EQ(truth.genes.size(), 2000u);
  EXPECT_GE(truth.n_de(), 600u);
  EXPECT_LE(truth.n_de(), 800u);
  for (const auto& t : truth.genes) {
    EXPECT_EQ(t.is_de, t.delta != 0.0);
    if (!t.is_de) {
      EXPECT_EQ(t.theta_case, t.theta_control);
    } else {
      EXPECT_EQ(t.true_direction, t.delta > 0 ? +1 : -1);
      EXPECT_GE(std::abs(t.delta), cfg.fc_min);
      EXPECT_LE(std::abs(t.delta), cfg.fc_max);
      EXPECT_DOUBLE_EQ(t.theta_case, t.theta_control * std::exp2(t.delta));
    }
  }
  EXPECT_DOUBLE_EQ(100.0 * std::exp2(2.0), 400.0);
  EXPECT_EQ(truth.gene_ids[0], "gene000001");
  EXPECT_EQ(truth.index_of("gene000042"), 41u);
  EXPECT_THROW(truth.index_of("gene999999"), std::domain_error);
  EXPECT_THROW(truth.index_of("other"), std::domain_error);
}

TEST(SampleTruth, TrialsDiffer) {
  const auto cfg = table1_setting(1);
  EXPECT_NE(sample_truth(cfg, 0).genes[0].theta_control, sample_truth(cfg, 1).genes[0].theta_control);
  EXPECT_EQ(sample_truth(cfg, 3).genes[7].theta_control, sample_truth(cfg, 3).genes[7].theta_control);
}

TEST(SimulateCounts, ZeroSigmaUsesTheta) {
  auto cfg = table1_setting(2);
  cfg.sigma = 0.0;
  cfg.n_genes = 300;
  const auto truth = sample_truth(cfg, 0);
  const auto studies = simulate_counts(truth, cfg, 0);
  ASSERT_EQ(studies.size(), 5u);
  for (const auto& s : studies) {
    for (std::size_t g = 0; g < cfg.n_genes; ++g) {
      EXPECT_EQ(s.mu_case[g], truth.genes[g].theta_case);
      EXPECT_EQ(s.mu_control[g], truth.genes[g].theta_control);
    }
  }
}

TEST(SimulateCounts, DimensionsFollowManifest) {
  auto cfg = table1_setting(1);
  cfg.n_genes = 50;
  const auto truth = sample_truth(cfg, 2);
  const auto studies = simulate_counts(truth, cfg, 2);
  for (std::size_t s = 0; s < studies.size(); ++s) {
    EXPECT_EQ(studies[s].study_id, cfg.studies[s].study_id);
    EXPECT_EQ(studies[s].counts.n_genes(), 50u);
    EXPECT_EQ(studies[s].counts.n_case(), static_cast<std::size_t>(cfg.studies[s].replicates_case));
    EXPECT_EQ(studies[s].counts.n_control(), static_cast<std::size_t>(cfg.studies[s].replicates_control));
    EXPECT_EQ(studies[s].counts.sample_ids().front(), "case_1");
  }
}

TEST(SimulateCounts, ReproducibleAcrossThreadCounts) {
  auto cfg = table1_setting(4);
  cfg.n_genes = 400;
  const auto truth = sample_truth(cfg, 5);
  const auto a = simulate_counts(truth, cfg, 5, 1);
  const auto b = simulate_counts(truth, cfg, 5, 3);
  for (std::size_t s = 0; s < a.size(); ++s) {
    EXPECT_TRUE(std::equal(a[s].counts.data().begin(), a[s].counts.data().end(), b[s].counts.data().begin()));
  }
  const auto c = simulate_counts(truth, cfg, 6, 1);
  EXPECT_FALSE(std::equal(a[0].counts.data().begin(), a[0].counts.data().end(), c[0].counts.data().begin()));
}

TEST(NegativeBinomial, MomentIdentity) {
  const auto m = nb_moments(100.0, 0.1, 100000, 1);
  EXPECT_NEAR(m.variance, 1100.0, 0.05 * 1100.0);
  EXPECT_NEAR(m.mean, 100.0, 3.0 * std::sqrt(1100.0 / 100000.0));
}

TEST(NegativeBinomial, PoissonLimit) {
  const auto m = nb_moments(50.0, 1e-8, 100000, 2);
  EXPECT_NEAR(m.variance, 50.0, 0.05 * 50.0);
  EXPECT_NEAR(m.mean, 50.0, 3.0 * std::sqrt(50.0 / 100000.0));
}

TEST(NegativeBinomial, EdgeCases) {
  auto rng = make_stream(1, 0, 0);
  EXPECT_EQ(sample_negative_binomial(rng, 0.0, 0.3), 0u);
  EXPECT_THROW(sample_negative_binomial(rng, -1.0, 0.3), std::domain_error);
  EXPECT_THROW(sample_negative_binomial(rng, 1.0, 0.0), std::domain_error);
}

TEST(SimulateCounts, ConflictsGrowWithVariability) {
  auto low = table1_setting(1);
  auto high = table1_setting(4);
  low.n_genes = high.n_genes = 1000;
  EXPECT_GT(conflicting_fraction(high), conflicting_fraction(low));
}

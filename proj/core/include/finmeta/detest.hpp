#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finmeta/counts.hpp"

namespace finmeta {

inline constexpr double kDefaultCpmThreshold = 0.85;

struct FilterResult {
  CountsMatrix kept;
  std::vector<std::string> removed;
};

/// Drops a gene when at least min(n_case, n_control) samples fall below
/// `cpm_threshold` counts per million. CPM uses the matrix's stored
/// library sizes; a sample with library size zero has CPM zero.
FilterResult filter_low_expression(const CountsMatrix& m, double cpm_threshold = kDefaultCpmThreshold);

/// Library sizes scaled by their geometric mean.
std::vector<double> size_factors(std::span<const double> library_sizes);

/**
 * Median-of-ratios size factors: for each sample, the median over genes with
 * no zero count of count / (geometric mean of that gene's counts). Robust to
 * the composition shift a large block of DE genes induces in raw library
 * sizes. Returns nullopt when no gene is positive in every sample.
 */
std::optional<std::vector<double>> median_ratio_size_factors(const CountsMatrix& m);

struct LrtOptions {
  double pseudo_count = 0.25;
  /// Weight given to `prior_dispersion` when it is set.
  double shrinkage = 0.2;
  std::optional<double> prior_dispersion;
};

struct LrtResult {
  double p_raw = 1.0;
  double log2fc = 0.0;
  double statistic = 0.0;
  double dispersion = 0.0;
  double mean_case = 0.0;
  double mean_control = 0.0;
};

/// Moment estimate max(1e-8, (s^2 - mean) / mean^2) on size-factor-normalized
/// counts, s^2 pooled within condition. Returns nullopt when there is no
/// within-condition degree of freedom or the gene is all zero.
std::optional<double> moment_dispersion(std::span<const std::uint64_t> counts, std::span<const Condition> conditions,
                                        std::span<const double> size_factors);

/**
 * Two-group negative-binomial likelihood-ratio test for one gene.
 *
 * Dispersion is held fixed at the (optionally shrunk) moment estimate; group
 * means are maximum-likelihood fits with per-sample size-factor offsets. The
 * statistic 2 (l_alt - l_null) is referred to chi-square(1).
 */
LrtResult nb_lrt_test(std::span<const std::uint64_t> counts, std::span<const Condition> conditions,
                      std::span<const double> size_factors, const LrtOptions& options = {});

struct PerStudyResult {
  std::string gene_id;
  std::optional<double> p_raw;
  double log2fc = 0.0;
  bool filtered = false;
};

struct PerStudyOptions {
  double cpm_threshold = kDefaultCpmThreshold;
  double shrinkage = 0.2;
  double pseudo_count = 0.25;
  /// Fraction trimmed from each end when averaging dispersions across genes.
  double trim = 0.1;
};

/// Filter, normalize, test. Results follow the input gene order; filtered
/// genes carry no p-value.
std::vector<PerStudyResult> run_per_study(const CountsMatrix& m, const PerStudyOptions& options = {},
                                          unsigned threads = 1);

}  // namespace finmeta

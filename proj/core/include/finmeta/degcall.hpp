#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "finmeta/combine.hpp"

namespace finmeta {

struct DegCriteria {
  double alpha = 0.05;
  double lfc_threshold = 1.0;

  void validate() const;
};

struct DegRecord {
  std::string gene_id;
  double n_g = 0.0;
  double mean_abs_log2fc = 0.0;
  int effective_direction = +1;
  bool concordant = true;
  double p_bh = 1.0;
  /// One glyph per manifest study: '+', '-', or '.' when absent.
  std::string effect_string;

  std::size_t n_present() const;
};

/// Renders per-study directions (manifest order) as an effect string.
std::string effect_string(std::span<const std::int8_t> directions);

/// Keeps genes with p_bh < alpha and mean |log2FC| > lfc_threshold. For IN,
/// genes with conflicting directions are dropped first. Sorted by |N_g|
/// descending, ties by gene id.
std::vector<DegRecord> call_degs(std::span<const CombinedResult> results, const DegCriteria& criteria,
                                 Method method);

/// DEG tallies by concordance class and number of studies present.
/// Index k runs 0..S; k = 0 is always empty.
struct PresenceCounts {
  std::vector<std::size_t> same;
  std::vector<std::size_t> mismatched;

  std::size_t at(bool concordant, std::size_t k) const { return concordant ? same.at(k) : mismatched.at(k); }
  std::size_t total() const;
};

PresenceCounts presence_counts(std::span<const DegRecord> degs, const Manifest& manifest);

struct OverlapReport {
  std::size_t common = 0;
  std::size_t only_a = 0;
  std::size_t only_b = 0;
  /// 100 * |a and b| / |b|; 0 when b is empty.
  double percent_common = 0.0;
};

OverlapReport compare_deg_sets(std::span<const DegRecord> a, std::span<const DegRecord> b);

}  // namespace finmeta

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace finmeta {

/// p-value combination rule.
///  - IN:  one-sided inverse-normal (Stouffer) with replicate weights.
///  - MIN: direction-signed |z| scores, two-sided.
///  - FIN: IN for genes with one direction across studies, MIN otherwise.
enum class Method { IN, MIN, FIN };

std::string_view to_string(Method method);
/// Accepts "in", "min", "fin" (any case).
Method parse_method(std::string_view text);

struct StudyMeta {
  std::string study_id;
  int replicates_case = 0;
  int replicates_control = 0;

  int total_replicates() const { return replicates_case + replicates_control; }
};

/**
 * Ordered set of studies taking part in a meta-analysis.
 *
 * Study order is significant: it fixes the glyph order of effect strings and
 * the column order of every per-study vector. An optional weight override
 * replaces replicate-derived weights; overrides are renormalized per gene.
 */
class Manifest {
public:
  Manifest() = default;
  explicit Manifest(std::vector<StudyMeta> studies);

  std::size_t size() const { return studies_.size(); }
  const std::vector<StudyMeta>& studies() const { return studies_; }
  const StudyMeta& operator[](std::size_t i) const { return studies_[i]; }

  std::optional<std::size_t> find(std::string_view study_id) const;
  /// Like find(), but throws std::domain_error for unknown ids.
  std::size_t index_of(std::string_view study_id) const;

  void set_weight_override(const std::map<std::string, double>& weights);
  bool has_weight_override() const { return !override_.empty(); }
  const std::vector<double>& weight_override() const { return override_; }

private:
  std::vector<StudyMeta> studies_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> override_;
};

/// One study's evidence for a gene. `study` indexes the manifest.
struct EvidenceEntry {
  std::size_t study = 0;
  double p_raw = 1.0;
  double log2fc = 0.0;
};

struct GeneEvidence {
  std::string gene_id;
  std::vector<EvidenceEntry> entries;
};

struct CombinedResult {
  std::string gene_id;
  Method method = Method::FIN;
  double n_g = 0.0;
  double p_combined = 1.0;
  /// Unset until combine_batch() runs BH over the whole pool.
  std::optional<double> p_bh;
  bool concordant = true;
  int effective_direction = +1;
  std::size_t n_present = 0;
  double mean_abs_log2fc = 0.0;
  /// Set when some study reported a fold change of exactly zero.
  bool zero_fold_change = false;
  /// Per-study direction in manifest order: +1, -1, or 0 when absent.
  std::vector<std::int8_t> directions;
};

/// Replicate-count weights w_s = sqrt(R_s / sum_{k present} R_k) for the
/// present studies, in the order given. With a weight override the
/// user weights are scaled so their squares sum to one.
std::vector<double> study_weights(const Manifest& manifest, std::span<const std::size_t> present);

/// Same as above, keyed by study id.
std::map<std::string, double> study_weights(const Manifest& manifest, std::span<const std::string> present);

/// Sign of a fold change; zero maps to +1.
int direction(double log2fc);

CombinedResult combine_in(const GeneEvidence& gene, const Manifest& manifest);
CombinedResult combine_min(const GeneEvidence& gene, const Manifest& manifest);
CombinedResult combine_fin(const GeneEvidence& gene, const Manifest& manifest);
CombinedResult combine(const GeneEvidence& gene, const Manifest& manifest, Method method);

/// Combines every gene and fills `p_bh` with one BH pass over the batch.
/// Output order follows input order and does not depend on `threads`.
std::vector<CombinedResult> combine_batch(std::span<const GeneEvidence> genes, const Manifest& manifest,
                                          Method method, unsigned threads = 1);

/// Lower and upper clamp applied to raw p-values before the quantile transform.
inline constexpr double kMinRawP = 1e-300;
inline constexpr double kMaxRawP = 1.0 - 1e-16;

}  // namespace finmeta

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace finmeta {

enum class Condition : std::uint8_t { Case, Control };

std::string_view to_string(Condition c);
/// Accepts "case" and "control" (any case).
Condition parse_condition(std::string_view text);

/**
 * Genes x samples table of non-negative counts for one study.
 *
 * Library sizes are fixed at construction (column sums unless supplied) and
 * survive row subsetting unchanged, so filtering never renormalizes.
 */
class CountsMatrix {
public:
  CountsMatrix() = default;
  CountsMatrix(std::vector<std::string> gene_ids, std::vector<std::string> sample_ids,
               std::vector<Condition> conditions, std::vector<std::uint64_t> counts,
               std::optional<std::vector<double>> library_sizes = std::nullopt);

  std::size_t n_genes() const { return gene_ids_.size(); }
  std::size_t n_samples() const { return sample_ids_.size(); }

  const std::vector<std::string>& gene_ids() const { return gene_ids_; }
  const std::vector<std::string>& sample_ids() const { return sample_ids_; }
  const std::vector<Condition>& conditions() const { return conditions_; }
  const std::vector<double>& library_sizes() const { return library_sizes_; }
  const std::vector<std::uint64_t>& data() const { return counts_; }

  std::span<const std::uint64_t> row(std::size_t gene) const {
    return {counts_.data() + gene * n_samples(), n_samples()};
  }
  std::uint64_t at(std::size_t gene, std::size_t sample) const { return counts_[gene * n_samples() + sample]; }

  std::size_t n_case() const;
  std::size_t n_control() const;

  /// Rows in the given order, keeping the current library sizes.
  CountsMatrix select_genes(std::span<const std::size_t> rows) const;
  /// Columns in the given order, carrying labels and library sizes along.
  CountsMatrix select_samples(std::span<const std::size_t> columns) const;

private:
  std::vector<std::string> gene_ids_;
  std::vector<std::string> sample_ids_;
  std::vector<Condition> conditions_;
  std::vector<std::uint64_t> counts_;
  std::vector<double> library_sizes_;
};

}  // namespace finmeta

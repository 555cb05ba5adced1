#include "finmeta/counts.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace finmeta {

std::string_view to_string(Condition c) { return c == Condition::Case ? "case" : "control"; }

Condition parse_condition(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "case") return Condition::Case;
  if (lower == "control") return Condition::Control;
  throw std::invalid_argument("unknown condition '" + std::string(text) + "' (expected case or control)");
}

CountsMatrix::CountsMatrix(std::vector<std::string> gene_ids, std::vector<std::string> sample_ids,
                           std::vector<Condition> conditions, std::vector<std::uint64_t> counts,
                           std::optional<std::vector<double>> library_sizes)
    : gene_ids_(std::move(gene_ids)),
      sample_ids_(std::move(sample_ids)),
      conditions_(std::move(conditions)),
      counts_(std::move(counts)) {
  if (conditions_.size() != sample_ids_.size()) throw std::domain_error("counts: one condition label per sample");
  if (counts_.size() != gene_ids_.size() * sample_ids_.size()) {
    throw std::domain_error("counts: data size does not match genes x samples");
  }
  if (n_case() == 0 || n_control() == 0) throw std::domain_error("counts: need at least one sample per condition");

  if (library_sizes) {
    if (library_sizes->size() != n_samples()) throw std::domain_error("counts: one library size per sample");
    library_sizes_ = std::move(*library_sizes);
  } else {
    library_sizes_.assign(n_samples(), 0.0);
    for (std::size_t g = 0; g < n_genes(); ++g) {
      for (std::size_t j = 0; j < n_samples(); ++j) library_sizes_[j] += static_cast<double>(at(g, j));
    }
  }
  for (double l : library_sizes_) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw std::domain_error("counts: invalid library size");
  }
}

std::size_t CountsMatrix::n_case() const {
  return static_cast<std::size_t>(std::count(conditions_.begin(), conditions_.end(), Condition::Case));
}

std::size_t CountsMatrix::n_control() const { return conditions_.size() - n_case(); }

CountsMatrix CountsMatrix::select_genes(std::span<const std::size_t> rows) const {
  std::vector<std::string> ids;
  std::vector<std::uint64_t> data;
  ids.reserve(rows.size());
  data.reserve(rows.size() * n_samples());
  for (std::size_t g : rows) {
    if (g >= n_genes()) throw std::out_of_range("select_genes: row out of range");
    ids.push_back(gene_ids_[g]);
    auto r = row(g);
    data.insert(data.end(), r.begin(), r.end());
  }
  return CountsMatrix(std::move(ids), sample_ids_, conditions_, std::move(data), library_sizes_);
}

CountsMatrix CountsMatrix::select_samples(std::span<const std::size_t> columns) const {
  std::vector<std::string> ids;
  std::vector<Condition> conds;
  std::vector<double> libs;
  for (std::size_t j : columns) {
    if (j >= n_samples()) throw std::out_of_range("select_samples: column out of range");
    ids.push_back(sample_ids_[j]);
    conds.push_back(conditions_[j]);
    libs.push_back(library_sizes_[j]);
  }
  std::vector<std::uint64_t> data;
  data.reserve(n_genes() * columns.size());
  for (std::size_t g = 0; g < n_genes(); ++g) {
    for (std::size_t j : columns) data.push_back(at(g, j));
  }
  return CountsMatrix(gene_ids_, std::move(ids), std::move(conds), std::move(data), std::move(libs));
}

}  // namespace finmeta

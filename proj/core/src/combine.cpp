#include "finmeta/combine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "finmeta/normstats.hpp"
#include "finmeta/parallel.hpp"

namespace finmeta {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::IN: return "IN";
    case Method::MIN: return "MIN";
    case Method::FIN: return "FIN";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "in") return Method::IN;
  if (lower == "min") return Method::MIN;
  if (lower == "fin") return Method::FIN;
  throw std::invalid_argument("unknown method '" + std::string(text) + "' (expected in, min or fin)");
}

Manifest::Manifest(std::vector<StudyMeta> studies) : studies_(std::move(studies)) {
  for (std::size_t i = 0; i < studies_.size(); ++i) {
    const auto& s = studies_[i];
    if (s.study_id.empty()) throw std::domain_error("manifest: empty study id");
    if (s.replicates_case < 1 || s.replicates_control < 1) {
      throw std::domain_error("manifest: study '" + s.study_id + "' needs at least one replicate per condition");
    }
    if (!index_.emplace(s.study_id, i).second) {
      throw std::domain_error("manifest: duplicate study id '" + s.study_id + "'");
    }
  }
}

std::optional<std::size_t> Manifest::find(std::string_view study_id) const {
  auto it = index_.find(std::string(study_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Manifest::index_of(std::string_view study_id) const {
  if (auto idx = find(study_id)) return *idx;
  throw std::domain_error("unknown study id '" + std::string(study_id) + "'");
}

void Manifest::set_weight_override(const std::map<std::string, double>& weights) {
  std::vector<double> values(studies_.size(), 0.0);
  for (std::size_t i = 0; i < studies_.size(); ++i) {
    auto it = weights.find(studies_[i].study_id);
    if (it == weights.end()) throw std::domain_error("weight override missing study '" + studies_[i].study_id + "'");
    if (!(it->second > 0.0) || !std::isfinite(it->second)) {
      throw std::domain_error("weight override for '" + it->first + "' must be positive");
    }
    values[i] = it->second;
  }
  for (const auto& [id, w] : weights) index_of(id);
  override_ = std::move(values);
}

std::vector<double> study_weights(const Manifest& manifest, std::span<const std::size_t> present) {
  if (present.empty()) throw std::domain_error("study_weights: no present studies");
  for (std::size_t s : present) {
    if (s >= manifest.size()) throw std::domain_error("study_weights: study index out of range");
  }

  std::vector<double> weights(present.size());
  if (manifest.has_weight_override()) {
    const auto& base = manifest.weight_override();
    double sum_sq = 0.0;
    for (std::size_t s : present) sum_sq += base[s] * base[s];
    const double norm = std::sqrt(sum_sq);
    for (std::size_t i = 0; i < present.size(); ++i) weights[i] = base[present[i]] / norm;
    return weights;
  }

  double total = 0.0;
  for (std::size_t s : present) total += manifest[s].total_replicates();
  for (std::size_t i = 0; i < present.size(); ++i) {
    weights[i] = std::sqrt(manifest[present[i]].total_replicates() / total);
  }
  return weights;
}

std::map<std::string, double> study_weights(const Manifest& manifest, std::span<const std::string> present) {
  std::vector<std::size_t> idx;
  idx.reserve(present.size());
  for (const auto& id : present) idx.push_back(manifest.index_of(id));
  const auto w = study_weights(manifest, idx);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < idx.size(); ++i) out.emplace(manifest[idx[i]].study_id, w[i]);
  return out;
}

int direction(double log2fc) {
  if (!std::isfinite(log2fc)) throw std::domain_error("direction: non-finite log2 fold change");
  return log2fc < 0.0 ? -1 : +1;
}

namespace {

int sign_of(double x) { return x < 0.0 ? -1 : +1; }

// Per-gene quantities shared by the three combiners.
struct Prepared {
  std::vector<double> weights;
  std::vector<double> z;  // Phi^{-1}(1 - p), clamped
  std::vector<int> dirs;
  bool concordant = true;
};

Prepared prepare(const GeneEvidence& gene, const Manifest& manifest, CombinedResult& out, Method method) {
  if (gene.entries.empty()) throw std::domain_error("gene '" + gene.gene_id + "' has no evidence");

  out.gene_id = gene.gene_id;
  out.method = method;
  out.n_present = gene.entries.size();
  out.directions.assign(manifest.size(), 0);

  Prepared prep;
  std::vector<std::size_t> present;
  present.reserve(gene.entries.size());
  double abs_lfc = 0.0;
  for (const auto& e : gene.entries) {
    if (e.study >= manifest.size()) {
      throw std::domain_error("gene '" + gene.gene_id + "' references a study outside the manifest");
    }
    if (out.directions[e.study] != 0) {
      throw std::domain_error("gene '" + gene.gene_id + "' has two entries for study '" +
                              manifest[e.study].study_id + "'");
    }
    if (!(e.p_raw >= 0.0 && e.p_raw <= 1.0)) {
      throw std::domain_error("gene '" + gene.gene_id + "' has a p-value outside [0, 1]");
    }
    const int d = direction(e.log2fc);
    if (e.log2fc == 0.0) out.zero_fold_change = true;
    out.directions[e.study] = static_cast<std::int8_t>(d);
    present.push_back(e.study);
    prep.dirs.push_back(d);
    prep.z.push_back(std_normal_upper_quantile(std::clamp(e.p_raw, kMinRawP, kMaxRawP)));
    abs_lfc += std::fabs(e.log2fc);
  }
  out.mean_abs_log2fc = abs_lfc / static_cast<double>(gene.entries.size());
  prep.weights = study_weights(manifest, present);
  prep.concordant = std::all_of(prep.dirs.begin(), prep.dirs.end(), [&](int d) { return d == prep.dirs.front(); });
  out.concordant = prep.concordant;
  return prep;
}

void apply_one_sided(const Prepared& prep, CombinedResult& out) {
  double n = 0.0;
  for (std::size_t i = 0; i < prep.z.size(); ++i) n += prep.weights[i] * prep.z[i];
  out.n_g = n;
  out.p_combined = std_normal_upper_tail(n);
}

void apply_two_sided(const Prepared& prep, CombinedResult& out) {
  double n = 0.0;
  for (std::size_t i = 0; i < prep.z.size(); ++i) n += prep.weights[i] * prep.dirs[i] * std::fabs(prep.z[i]);
  out.n_g = n;
  out.p_combined = std::min(1.0, 2.0 * std_normal_upper_tail(std::fabs(n)));
}

}  // namespace

CombinedResult combine_in(const GeneEvidence& gene, const Manifest& manifest) {
  CombinedResult out;
  const Prepared prep = prepare(gene, manifest, out, Method::IN);
  apply_one_sided(prep, out);
  out.effective_direction = prep.concordant ? prep.dirs.front() : sign_of(out.n_g);
  return out;
}

CombinedResult combine_min(const GeneEvidence& gene, const Manifest& manifest) {
  CombinedResult out;
  const Prepared prep = prepare(gene, manifest, out, Method::MIN);
  apply_two_sided(prep, out);
  out.effective_direction = sign_of(out.n_g);
  return out;
}

CombinedResult combine_fin(const GeneEvidence& gene, const Manifest& manifest) {
  CombinedResult out;
  const Prepared prep = prepare(gene, manifest, out, Method::FIN);
  if (prep.concordant) {
    apply_one_sided(prep, out);
    out.effective_direction = prep.dirs.front();
  } else {
    apply_two_sided(prep, out);
    out.effective_direction = sign_of(out.n_g);
  }
  return out;
}

CombinedResult combine(const GeneEvidence& gene, const Manifest& manifest, Method method) {
  switch (method) {
    case Method::IN: return combine_in(gene, manifest);
    case Method::MIN: return combine_min(gene, manifest);
    case Method::FIN: return combine_fin(gene, manifest);
  }
  throw std::invalid_argument("combine: unknown method");
}

std::vector<CombinedResult> combine_batch(std::span<const GeneEvidence> genes, const Manifest& manifest,
                                          Method method, unsigned threads) {
  {
    std::unordered_set<std::string_view> seen;
    seen.reserve(genes.size());
    for (const auto& g : genes) {
      if (!seen.insert(g.gene_id).second) throw std::domain_error("duplicate gene id '" + g.gene_id + "'");
    }
  }

  std::vector<CombinedResult> results(genes.size());
  parallel_for(genes.size(), threads, [&](std::size_t i) { results[i] = combine(genes[i], manifest, method); });

  std::vector<double> p(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) p[i] = results[i].p_combined;
  const auto adjusted = bh_adjust(p);
  for (std::size_t i = 0; i < results.size(); ++i) results[i].p_bh = adjusted[i];
  return results;
}

}  // namespace finmeta

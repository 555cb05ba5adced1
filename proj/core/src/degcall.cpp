#include "finmeta/degcall.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace finmeta {

void DegCriteria::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("DegCriteria: alpha must lie in (0, 1)");
  if (!(lfc_threshold >= 0.0) || !std::isfinite(lfc_threshold)) {
    throw std::domain_error("DegCriteria: lfc threshold must be a nonnegative number");
  }
}

std::size_t DegRecord::n_present() const {
  return static_cast<std::size_t>(std::count_if(effect_string.begin(), effect_string.end(),
                                                [](char c) { return c != '.'; }));
}

std::string effect_string(std::span<const std::int8_t> directions) {
  std::string out;
  out.reserve(directions.size());
  for (auto d : directions) out.push_back(d > 0 ? '+' : d < 0 ? '-' : '.');
  return out;
}

std::vector<DegRecord> call_degs(std::span<const CombinedResult> results, const DegCriteria& criteria,
                                 Method method) {
  criteria.validate();
  std::vector<DegRecord> degs;
  for (const auto& r : results) {
    if (!r.p_bh) throw std::domain_error("call_degs: gene '" + r.gene_id + "' has no BH-adjusted p-value");
    if (method == Method::IN && !r.concordant) continue;
    if (!(*r.p_bh < criteria.alpha && r.mean_abs_log2fc > criteria.lfc_threshold)) continue;
    degs.push_back(DegRecord{r.gene_id, r.n_g, r.mean_abs_log2fc, r.effective_direction, r.concordant, *r.p_bh,
                             effect_string(r.directions)});
  }
  std::sort(degs.begin(), degs.end(), [](const DegRecord& a, const DegRecord& b) {
    const double aa = std::fabs(a.n_g), bb = std::fabs(b.n_g);
    if (aa != bb) return aa > bb;
    return a.gene_id < b.gene_id;
  });
  return degs;
}

std::size_t PresenceCounts::total() const {
  std::size_t n = 0;
  for (auto v : same) n += v;
  for (auto v : mismatched) n += v;
  return n;
}

PresenceCounts presence_counts(std::span<const DegRecord> degs, const Manifest& manifest) {
  const std::size_t studies = manifest.size();
  PresenceCounts counts{std::vector<std::size_t>(studies + 1, 0), std::vector<std::size_t>(studies + 1, 0)};
  for (const auto& d : degs) {
    if (d.effect_string.size() != studies) {
      throw std::domain_error("presence_counts: effect string of '" + d.gene_id + "' does not match the manifest");
    }
    bool up = false, down = false;
    for (char c : d.effect_string) {
      if (c == '+') up = true;
      else if (c == '-') down = true;
      else if (c != '.') throw std::domain_error("presence_counts: bad effect glyph in '" + d.gene_id + "'");
    }
    const std::size_t k = d.n_present();
    if (k == 0) throw std::domain_error("presence_counts: '" + d.gene_id + "' is absent from every study");
    (up && down ? counts.mismatched : counts.same)[k] += 1;
  }
  return counts;
}

namespace {

std::unordered_set<std::string_view> id_set(std::span<const DegRecord> degs) {
  std::unordered_set<std::string_view> ids;
  ids.reserve(degs.size());
  for (const auto& d : degs) {
    if (!ids.insert(d.gene_id).second) throw std::domain_error("duplicate gene id '" + d.gene_id + "' in DEG list");
  }
  return ids;
}

}  // namespace

OverlapReport compare_deg_sets(std::span<const DegRecord> a, std::span<const DegRecord> b) {
  const auto ia = id_set(a);
  const auto ib = id_set(b);
  OverlapReport report;
  for (auto id : ia) {
    if (ib.contains(id)) ++report.common;
  }
  report.only_a = ia.size() - report.common;
  report.only_b = ib.size() - report.common;
  report.percent_common = ib.empty() ? 0.0 : 100.0 * static_cast<double>(report.common) / static_cast<double>(ib.size());
  return report;
}

}  // namespace finmeta

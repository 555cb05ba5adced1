#include "finmeta/detest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "finmeta/normstats.hpp"
#include "finmeta/parallel.hpp"

namespace finmeta {

namespace {

constexpr double kMinDispersion = 1e-8;

void check_shapes(std::span<const std::uint64_t> counts, std::span<const Condition> conditions,
                  std::span<const double> sf) {
  if (counts.size() != conditions.size() || counts.size() != sf.size()) {
    throw std::domain_error("nb_lrt_test: counts, labels and size factors differ in length");
  }
  bool has_case = false, has_ctrl = false;
  for (auto c : conditions) (c == Condition::Case ? has_case : has_ctrl) = true;
  if (!has_case || !has_ctrl) throw std::domain_error("nb_lrt_test: need at least one sample per condition");
  for (double s : sf) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::domain_error("nb_lrt_test: size factors must be positive");
  }
}

// NB log-likelihood of one group with mean mu * sf_j per sample, dropping
// terms that do not depend on mu.
double group_loglik(std::span<const std::uint64_t> y, std::span<const double> sf, double mu, double phi) {
  double ll = 0.0;
  const double size = 1.0 / phi;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double m = sf[j] * mu;
    const double yj = static_cast<double>(y[j]);
    if (m == 0.0) {
      if (yj > 0.0) return -std::numeric_limits<double>::infinity();
      continue;
    }
    ll += yj * std::log(m) - (yj + size) * std::log1p(phi * m);
  }
  return ll;
}

// Maximizes the group likelihood over log(mu) with a safeguarded Newton
// iteration; the objective is concave in log(mu).
double fit_group_mean(std::span<const std::uint64_t> y, std::span<const double> sf, double phi) {
  double total = 0.0, sf_total = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    total += static_cast<double>(y[j]);
    sf_total += sf[j];
  }
  if (total == 0.0) return 0.0;

  double eta = std::log(total / sf_total);
  double ll = group_loglik(y, sf, std::exp(eta), phi);
  for (int iter = 0; iter < 100; ++iter) {
    const double mu = std::exp(eta);
    double score = 0.0, info = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double m = sf[j] * mu;
      const double yj = static_cast<double>(y[j]);
      const double denom = 1.0 + phi * m;
      score += (yj - m) / denom;
      info += m * (1.0 + phi * yj) / (denom * denom);
    }
    if (info <= 0.0) break;
    double step = score / info;
    if (std::fabs(step) < 1e-10) {
      eta += step;
      break;
    }
    double next_ll = group_loglik(y, sf, std::exp(eta + step), phi);
    for (int halvings = 0; next_ll < ll && halvings < 30; ++halvings) {
      step *= 0.5;
      next_ll = group_loglik(y, sf, std::exp(eta + step), phi);
    }
    if (next_ll < ll) break;
    eta += step;
    ll = next_ll;
  }
  return std::exp(eta);
}

void split_groups(std::span<const std::uint64_t> counts, std::span<const Condition> conditions,
                  std::span<const double> sf, std::vector<std::uint64_t>& y_case, std::vector<double>& sf_case,
                  std::vector<std::uint64_t>& y_ctrl, std::vector<double>& sf_ctrl) {
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (conditions[j] == Condition::Case) {
      y_case.push_back(counts[j]);
      sf_case.push_back(sf[j]);
    } else {
      y_ctrl.push_back(counts[j]);
      sf_ctrl.push_back(sf[j]);
    }
  }
}

double trimmed_mean(std::vector<double> values, double trim) {
  if (values.empty()) return kMinDispersion;
  std::sort(values.begin(), values.end());
  const auto cut = static_cast<std::size_t>(std::floor(trim * static_cast<double>(values.size())));
  const auto begin = values.begin() + static_cast<std::ptrdiff_t>(cut);
  const auto end = values.end() - static_cast<std::ptrdiff_t>(cut);
  if (begin >= end) return values[values.size() / 2];
  return std::accumulate(begin, end, 0.0) / static_cast<double>(end - begin);
}

}  // namespace

FilterResult filter_low_expression(const CountsMatrix& m, double cpm_threshold) {
  if (!(cpm_threshold >= 0.0) || !std::isfinite(cpm_threshold)) {
    throw std::domain_error("filter_low_expression: threshold must be a nonnegative number");
  }
  const auto& libs = m.library_sizes();
  const std::size_t min_group = std::min(m.n_case(), m.n_control());

  std::vector<std::size_t> keep;
  FilterResult result;
  for (std::size_t g = 0; g < m.n_genes(); ++g) {
    std::size_t low = 0;
    for (std::size_t j = 0; j < m.n_samples(); ++j) {
      const double cpm = libs[j] > 0.0 ? static_cast<double>(m.at(g, j)) * 1e6 / libs[j] : 0.0;
      if (cpm < cpm_threshold) ++low;
    }
    if (low >= min_group) {
      result.removed.push_back(m.gene_ids()[g]);
    } else {
      keep.push_back(g);
    }
  }
  result.kept = m.select_genes(keep);
  return result;
}

std::vector<double> size_factors(std::span<const double> library_sizes) {
  if (library_sizes.empty()) throw std::domain_error("size_factors: no samples");
  double log_sum = 0.0;
  for (double l : library_sizes) {
    if (!(l > 0.0) || !std::isfinite(l)) throw std::domain_error("size_factors: library sizes must be positive");
    log_sum += std::log(l);
  }
  const double geo = std::exp(log_sum / static_cast<double>(library_sizes.size()));
  std::vector<double> sf(library_sizes.size());
  for (std::size_t j = 0; j < sf.size(); ++j) sf[j] = library_sizes[j] / geo;
  return sf;
}

std::optional<std::vector<double>> median_ratio_size_factors(const CountsMatrix& m) {
  const std::size_t n = m.n_samples();
  std::vector<std::vector<double>> ratios(n);
  std::vector<double> logs(n);
  for (std::size_t g = 0; g < m.n_genes(); ++g) {
    const auto row = m.row(g);
    if (std::any_of(row.begin(), row.end(), [](std::uint64_t c) { return c == 0; })) continue;
    double mean_log = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      logs[j] = std::log(static_cast<double>(row[j]));
      mean_log += logs[j];
    }
    mean_log /= static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) ratios[j].push_back(logs[j] - mean_log);
  }
  if (ratios.front().empty()) return std::nullopt;

  std::vector<double> sf(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto& r = ratios[j];
    const std::size_t mid = r.size() / 2;
    std::nth_element(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(mid), r.end());
    double med = r[mid];
    if (r.size() % 2 == 0) med = 0.5 * (med + *std::max_element(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(mid)));
    sf[j] = std::exp(med);
  }
  // Center on a geometric mean of one, matching size_factors().
  double log_sum = 0.0;
  for (double v : sf) log_sum += std::log(v);
  const double geo = std::exp(log_sum / static_cast<double>(n));
  for (double& v : sf) v /= geo;
  return sf;
}

std::optional<double> moment_dispersion(std::span<const std::uint64_t> counts, std::span<const Condition> conditions,
                                        std::span<const double> sf) {
  check_shapes(counts, conditions, sf);
  double sum[2] = {0.0, 0.0};
  std::size_t n[2] = {0, 0};
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const int c = conditions[j] == Condition::Case ? 0 : 1;
    sum[c] += static_cast<double>(counts[j]) / sf[j];
    ++n[c];
  }
  const std::size_t df = counts.size() - 2;
  const double overall = (sum[0] + sum[1]) / static_cast<double>(counts.size());
  if (df == 0 || overall == 0.0) return std::nullopt;

  const double group_mean[2] = {sum[0] / static_cast<double>(n[0]), sum[1] / static_cast<double>(n[1])};
  double ss = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const int c = conditions[j] == Condition::Case ? 0 : 1;
    const double d = static_cast<double>(counts[j]) / sf[j] - group_mean[c];
    ss += d * d;
  }
  const double s2 = ss / static_cast<double>(df);
  return std::max(kMinDispersion, (s2 - overall) / (overall * overall));
}

LrtResult nb_lrt_test(std::span<const std::uint64_t> counts, std::span<const Condition> conditions,
                      std::span<const double> sf, const LrtOptions& options) {
  check_shapes(counts, conditions, sf);
  LrtResult result;
  const bool all_zero = std::all_of(counts.begin(), counts.end(), [](std::uint64_t c) { return c == 0; });
  if (all_zero) return result;

  double phi = moment_dispersion(counts, conditions, sf).value_or(options.prior_dispersion.value_or(kMinDispersion));
  if (options.prior_dispersion) {
    phi = (1.0 - options.shrinkage) * phi + options.shrinkage * *options.prior_dispersion;
  }
  phi = std::max(kMinDispersion, phi);
  result.dispersion = phi;

  std::vector<std::uint64_t> y_case, y_ctrl;
  std::vector<double> sf_case, sf_ctrl;
  split_groups(counts, conditions, sf, y_case, sf_case, y_ctrl, sf_ctrl);

  const double mu_null = fit_group_mean(counts, sf, phi);
  const double mu_case = fit_group_mean(y_case, sf_case, phi);
  const double mu_ctrl = fit_group_mean(y_ctrl, sf_ctrl, phi);

  const double ll_null = group_loglik(counts, sf, mu_null, phi);
  const double ll_alt = group_loglik(y_case, sf_case, mu_case, phi) + group_loglik(y_ctrl, sf_ctrl, mu_ctrl, phi);
  const double stat = std::max(0.0, 2.0 * (ll_alt - ll_null));

  result.statistic = stat;
  result.p_raw = chisq1_upper_tail(stat);
  result.mean_case = mu_case;
  result.mean_control = mu_ctrl;
  result.log2fc = std::log2((mu_case + options.pseudo_count) / (mu_ctrl + options.pseudo_count));
  return result;
}

std::vector<PerStudyResult> run_per_study(const CountsMatrix& m, const PerStudyOptions& options, unsigned threads) {
  const auto filtered = filter_low_expression(m, options.cpm_threshold);
  const CountsMatrix& kept = filtered.kept;
  std::vector<PerStudyResult> out;
  out.reserve(m.n_genes());
  if (kept.n_genes() == 0) {
    for (const auto& id : m.gene_ids()) out.push_back(PerStudyResult{id, std::nullopt, 0.0, true});
    return out;
  }
  auto ratio_factors = median_ratio_size_factors(kept);
  const auto sf = ratio_factors ? std::move(*ratio_factors) : size_factors(kept.library_sizes());

  std::vector<std::optional<double>> raw(kept.n_genes());
  parallel_for(kept.n_genes(), threads,
               [&](std::size_t g) { raw[g] = moment_dispersion(kept.row(g), kept.conditions(), sf); });
  std::vector<double> pooled;
  for (const auto& d : raw) {
    if (d) pooled.push_back(*d);
  }

  LrtOptions lrt;
  lrt.pseudo_count = options.pseudo_count;
  lrt.shrinkage = options.shrinkage;
  if (!pooled.empty()) lrt.prior_dispersion = trimmed_mean(std::move(pooled), options.trim);

  std::vector<LrtResult> tests(kept.n_genes());
  parallel_for(kept.n_genes(), threads,
               [&](std::size_t g) { tests[g] = nb_lrt_test(kept.row(g), kept.conditions(), sf, lrt); });

  std::size_t next_kept = 0;
  for (std::size_t g = 0; g < m.n_genes(); ++g) {
    const auto& id = m.gene_ids()[g];
    if (next_kept < kept.n_genes() && kept.gene_ids()[next_kept] == id) {
      out.push_back(PerStudyResult{id, tests[next_kept].p_raw, tests[next_kept].log2fc, false});
      ++next_kept;
    } else {
      out.push_back(PerStudyResult{id, std::nullopt, 0.0, true});
    }
  }
  return out;
}

}  // namespace finmeta

#include "finmeta/evalharness.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "finmeta/detest.hpp"
#include "finmeta/normstats.hpp"
#include "finmeta/parallel.hpp"

namespace finmeta {

RocResult roc_auc(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw std::domain_error("roc_auc: scores and labels differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::domain_error("roc_auc: need both positive and negative labels");
  for (double s : scores) {
    if (std::isnan(s)) throw std::domain_error("roc_auc: NaN score");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult out;
  out.curve.points.push_back({0.0, 0.0});
  const double pos = static_cast<double>(n_pos), neg = static_cast<double>(n_neg);
  std::size_t tp = 0, fp = 0;
  double area = 0.0;  // in units of pos * neg
  for (std::size_t i = 0; i < order.size();) {
    std::size_t group_tp = 0, group_fp = 0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] ? group_tp : group_fp) += 1;
    area += static_cast<double>(group_fp) * (static_cast<double>(tp) + 0.5 * static_cast<double>(group_tp));
    tp += group_tp;
    fp += group_fp;
    out.curve.points.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  out.auc = area / (pos * neg);
  return out;
}

double interpolate_tpr(const RocCurve& curve, double fpr) {
  const auto& pts = curve.points;
  if (pts.empty()) throw std::domain_error("interpolate_tpr: empty curve");
  // First point strictly to the right of fpr.
  auto right = std::upper_bound(pts.begin(), pts.end(), fpr,
                                [](double f, const RocPoint& p) { return f < p.fpr; });
  if (right == pts.begin()) return pts.front().tpr;
  const RocPoint& left = *(right - 1);  // last point with p.fpr <= fpr, highest tpr there
  if (left.fpr == fpr || right == pts.end()) return left.tpr;
  const double t = (fpr - left.fpr) / (right->fpr - left.fpr);
  return left.tpr + t * (right->tpr - left.tpr);
}

RocCurve average_roc(std::span<const RocCurve> curves, double grid_step) {
  if (curves.empty()) throw std::domain_error("average_roc: no curves");
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw std::domain_error("average_roc: grid step must lie in (0, 1]");
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / grid_step));

  RocCurve mean;
  mean.points.push_back({0.0, 0.0});
  for (std::size_t i = 0; i <= steps; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(steps);
    double sum = 0.0;
    for (const auto& c : curves) sum += interpolate_tpr(c, f);
    mean.points.push_back({f, sum / static_cast<double>(curves.size())});
  }
  return mean;
}

AucSummary summarize_auc(std::span<const double> aucs) {
  if (aucs.empty()) throw std::domain_error("summarize_auc: no values");
  AucSummary s;
  s.mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
  if (aucs.size() > 1) {
    const double shift = aucs.front();
    double shifted_mean = 0.0;
    for (double a : aucs) shifted_mean += a - shift;
    shifted_mean /= static_cast<double>(aucs.size());
    double ss = 0.0;
    for (double a : aucs) ss += (a - shift - shifted_mean) * (a - shift - shifted_mean);
    s.std = std::sqrt(ss / static_cast<double>(aucs.size() - 1));
  }
  return s;
}

std::vector<double> ranking_scores(std::span<const CombinedResult> results) {
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key_less = [&](std::size_t a, std::size_t b) {
    if (results[a].p_combined != results[b].p_combined) return results[a].p_combined < results[b].p_combined;
    return std::fabs(results[a].n_g) > std::fabs(results[b].n_g);
  };
  std::stable_sort(order.begin(), order.end(), key_less);

  // Most significant gene gets the highest score.
  std::vector<double> scores(results.size());
  double score = static_cast<double>(results.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && key_less(order[i - 1], order[i])) score -= 1.0;
    scores[order[i]] = score;
  }
  return scores;
}

double observed_fdr(std::span<const DegRecord> degs, const SimTruth& truth) {
  std::size_t false_calls = 0;
  for (const auto& d : degs) {
    if (!truth.genes[truth.index_of(d.gene_id)].is_de) ++false_calls;
  }
  return static_cast<double>(false_calls) / static_cast<double>(std::max<std::size_t>(1, degs.size()));
}

UniqueDegMetrics unique_deg_metrics(std::span<const DegRecord> method_degs, std::span<const DegRecord> in_degs,
                                    const SimTruth& truth) {
  std::unordered_set<std::string_view> in_ids;
  for (const auto& d : in_degs) {
    truth.index_of(d.gene_id);
    in_ids.insert(d.gene_id);
  }
  UniqueDegMetrics m;
  for (const auto& d : method_degs) {
    const auto& t = truth.genes[truth.index_of(d.gene_id)];
    if (in_ids.contains(d.gene_id)) continue;
    ++m.n_unique;
    if (!t.is_de) continue;
    ++m.n_true_positive;
    if (d.effective_direction == t.true_direction) ++m.n_direction_correct;
  }
  if (m.n_unique > 0) m.tp_proportion = static_cast<double>(m.n_true_positive) / static_cast<double>(m.n_unique);
  if (m.n_true_positive > 0) {
    m.direction_correct_proportion =
        static_cast<double>(m.n_direction_correct) / static_cast<double>(m.n_true_positive);
  }
  return m;
}

const MethodSummary& EvalReport::summary(Method method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw std::out_of_range("EvalReport: method '" + std::string(to_string(method)) + "' was not evaluated");
}

namespace {

std::vector<GeneEvidence> collect_evidence(const SimTruth& truth, const std::vector<StudyCounts>& studies) {
  std::vector<GeneEvidence> genes(truth.gene_ids.size());
  for (std::size_t g = 0; g < genes.size(); ++g) genes[g].gene_id = truth.gene_ids[g];
  for (std::size_t s = 0; s < studies.size(); ++s) {
    const auto per_study = run_per_study(studies[s].counts);
    for (std::size_t g = 0; g < per_study.size(); ++g) {
      if (per_study[g].filtered) continue;
      genes[g].entries.push_back(EvidenceEntry{s, *per_study[g].p_raw, per_study[g].log2fc});
    }
  }
  std::erase_if(genes, [](const GeneEvidence& g) { return g.entries.empty(); });
  return genes;
}

std::size_t count_conflicting(std::span<const DegRecord> degs) {
  return static_cast<std::size_t>(std::count_if(degs.begin(), degs.end(), [](const DegRecord& d) { return !d.concordant; }));
}

}  // namespace

TrialOutcome run_trial(const SimConfig& config, std::span<const Method> methods, const DegCriteria& criteria,
                       std::size_t trial_index) {
  criteria.validate();
  if (methods.empty()) throw std::domain_error("run_trial: no methods requested");

  TrialOutcome out;
  out.truth = sample_truth(config, trial_index);
  const auto studies = simulate_counts(out.truth, config, trial_index);
  const Manifest manifest(config.studies);
  out.evidence = collect_evidence(out.truth, studies);

  auto& metrics = out.metrics;
  metrics.trial = trial_index;
  metrics.n_genes = out.evidence.size();

  auto label_store = std::make_unique<bool[]>(out.evidence.size());
  std::span<bool> labels(label_store.get(), out.evidence.size());
  for (std::size_t i = 0; i < out.evidence.size(); ++i) {
    labels[i] = out.truth.genes[out.truth.index_of(out.evidence[i].gene_id)].is_de;
    if (labels[i]) ++metrics.n_true_degs;
  }

  const auto in_results = combine_batch(out.evidence, manifest, Method::IN);
  for (const auto& r : in_results) {
    if (!r.concordant) ++metrics.n_conflicting_genes;
  }
  const auto in_degs = call_degs(in_results, criteria, Method::IN);

  for (Method method : methods) {
    auto results = method == Method::IN ? in_results : combine_batch(out.evidence, manifest, method);
    auto degs = call_degs(results, criteria, method);

    const auto scores = ranking_scores(results);
    auto roc = roc_auc(scores, labels);

    MethodTrialMetrics m;
    m.method = method;
    m.auc = roc.auc;
    m.observed_fdr = observed_fdr(degs, out.truth);
    m.n_degs = degs.size();
    m.n_conflicting_degs = count_conflicting(degs);
    m.unique = unique_deg_metrics(degs, in_degs, out.truth);
    metrics.methods.push_back(m);

    out.results.push_back(std::move(results));
    out.degs.push_back(std::move(degs));
    out.curves.push_back(std::move(roc.curve));
  }
  return out;
}

EvalReport run_experiment(const SimConfig& config, std::span<const Method> methods, const DegCriteria& criteria,
                          unsigned threads, std::string label) {
  config.validate();
  criteria.validate();
  if (methods.empty()) throw std::domain_error("run_experiment: no methods requested");

  std::vector<TrialMetrics> trials(config.n_trials);
  std::vector<std::vector<RocCurve>> curves(config.n_trials);
  parallel_for(config.n_trials, threads, [&](std::size_t t) {
    auto outcome = run_trial(config, methods, criteria, t);
    trials[t] = std::move(outcome.metrics);
    curves[t] = std::move(outcome.curves);
  });

  EvalReport report;
  report.label = std::move(label);
  report.config = config;
  report.criteria = criteria;
  const double n = static_cast<double>(config.n_trials);
  for (const auto& t : trials) {
    report.mean_genes += static_cast<double>(t.n_genes) / n;
    report.mean_conflicting_genes += static_cast<double>(t.n_conflicting_genes) / n;
    report.mean_true_degs += static_cast<double>(t.n_true_degs) / n;
  }

  for (std::size_t k = 0; k < methods.size(); ++k) {
    MethodSummary s;
    s.method = methods[k];
    std::vector<double> aucs;
    std::vector<RocCurve> method_curves;
    double tp_sum = 0.0, dir_sum = 0.0;
    for (std::size_t t = 0; t < trials.size(); ++t) {
      const auto& m = trials[t].methods[k];
      aucs.push_back(m.auc);
      method_curves.push_back(curves[t][k]);
      s.mean_observed_fdr += m.observed_fdr / n;
      s.mean_degs += static_cast<double>(m.n_degs) / n;
      s.mean_conflicting_degs += static_cast<double>(m.n_conflicting_degs) / n;
      s.max_conflicting_degs = std::max(s.max_conflicting_degs, m.n_conflicting_degs);
      s.mean_unique += static_cast<double>(m.unique.n_unique) / n;
      if (m.unique.n_unique > 0) {
        ++s.trials_with_unique;
        tp_sum += m.unique.tp_proportion;
      }
      if (m.unique.n_true_positive > 0) {
        ++s.trials_with_unique_tp;
        dir_sum += m.unique.direction_correct_proportion;
      }
    }
    s.auc = summarize_auc(aucs);
    if (s.trials_with_unique > 0) s.mean_unique_tp_proportion = tp_sum / static_cast<double>(s.trials_with_unique);
    if (s.trials_with_unique_tp > 0) {
      s.mean_unique_direction_correct = dir_sum / static_cast<double>(s.trials_with_unique_tp);
    }
    s.mean_roc = average_roc(method_curves);
    report.methods.push_back(std::move(s));
  }
  report.trials = std::move(trials);
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  using nlohmann::json;
  json studies = json::array();
  for (const auto& s : report.config.studies) {
    studies.push_back({{"study_id", s.study_id}, {"replicates_case", s.replicates_case},
                       {"replicates_control", s.replicates_control}});
  }
  const auto& c = report.config;
  json config = {{"sigma", c.sigma},
                 {"studies", studies},
                 {"n_genes", c.n_genes},
                 {"prop_de", c.prop_de},
                 {"base_mean_log_mu", c.base_mean_log_mu},
                 {"base_mean_log_sd", c.base_mean_log_sd},
                 {"fc_min", c.fc_min},
                 {"fc_max", c.fc_max},
                 {"disp_log_mu", c.disp_log_mu},
                 {"disp_log_sd", c.disp_log_sd},
                 {"seed", c.seed},
                 {"n_trials", c.n_trials}};

  json methods = json::array();
  for (const auto& m : report.methods) {
    methods.push_back({{"method", to_string(m.method)},
                       {"auc_mean", m.auc.mean},
                       {"auc_std", m.auc.std},
                       {"observed_fdr_mean", m.mean_observed_fdr},
                       {"degs_mean", m.mean_degs},
                       {"conflicting_degs_mean", m.mean_conflicting_degs},
                       {"conflicting_degs_max", m.max_conflicting_degs},
                       {"unique_vs_in_mean", m.mean_unique},
                       {"unique_tp_proportion_mean", m.mean_unique_tp_proportion},
                       {"trials_with_unique", m.trials_with_unique},
                       {"unique_direction_correct_mean", m.mean_unique_direction_correct},
                       {"trials_with_unique_tp", m.trials_with_unique_tp}});
  }

  json trials = json::array();
  for (const auto& t : report.trials) {
    json per_method = json::array();
    for (const auto& m : t.methods) {
      per_method.push_back({{"method", to_string(m.method)},
                            {"auc", m.auc},
                            {"observed_fdr", m.observed_fdr},
                            {"degs", m.n_degs},
                            {"conflicting_degs", m.n_conflicting_degs},
                            {"unique_vs_in", m.unique.n_unique},
                            {"unique_true_positives", m.unique.n_true_positive},
                            {"unique_direction_correct", m.unique.n_direction_correct}});
    }
    trials.push_back({{"trial", t.trial},
                      {"genes", t.n_genes},
                      {"conflicting_genes", t.n_conflicting_genes},
                      {"true_degs", t.n_true_degs},
                      {"methods", per_method}});
  }

  return {{"label", report.label},
          {"config", config},
          {"criteria", {{"alpha", report.criteria.alpha}, {"lfc_threshold", report.criteria.lfc_threshold}}},
          {"genes_mean", report.mean_genes},
          {"conflicting_genes_mean", report.mean_conflicting_genes},
          {"true_degs_mean", report.mean_true_degs},
          {"methods", methods},
          {"trials", trials}};
}

double signed_quantile_ks(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::domain_error("signed_quantile_ks: n must be positive");
  auto rng = make_stream(seed, 0, 7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> u(n);
  for (auto& x : u) {
    double p = unif(rng);
    while (p <= 0.0) p = unif(rng);
    const double sign = coin(rng) ? 1.0 : -1.0;
    x = std_normal_cdf(sign * std::abs(std_normal_upper_quantile(p)));
  }
  return ks_uniform_stat(u);
}

std::vector<std::size_t> unit_histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw std::domain_error("unit_histogram: bins must be positive");
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("unit_histogram: value outside [0, 1]");
    const auto k = std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)));
    ++counts[k];
  }
  return counts;
}

}  // namespace finmeta

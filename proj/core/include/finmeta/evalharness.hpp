#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finmeta/combine.hpp"
#include "finmeta/degcall.hpp"
#include "finmeta/simgen.hpp"

namespace finmeta {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Points sorted by fpr, running from (0, 0) to (1, 1).
struct RocCurve {
  std::vector<RocPoint> points;
};

struct RocResult {
  RocCurve curve;
  double auc = 0.0;
};

/// ROC curve over every distinct score threshold (higher score = more
/// significant). Tied scores move both rates at once, so the trapezoid AUC
/// equals the Mann-Whitney concordance with ties counted half.
RocResult roc_auc(std::span<const double> scores, std::span<const bool> labels);

/// Vertical averaging: each curve's TPR is interpolated on the FPR grid
/// {0, step, ..., 1} and averaged pointwise. The result starts with (0, 0).
RocCurve average_roc(std::span<const RocCurve> curves, double grid_step = 0.01);

/// TPR of a curve at `fpr`; on a vertical segment the upper value is used.
double interpolate_tpr(const RocCurve& curve, double fpr);

struct AucSummary {
  double mean = 0.0;
  /// Sample standard deviation; 0 for a single trial.
  double std = 0.0;
};

AucSummary summarize_auc(std::span<const double> aucs);

/// Ranking scores for ROC analysis: order by p_combined ascending, then
/// |N_g| descending. Genes tied on both share a score.
std::vector<double> ranking_scores(std::span<const CombinedResult> results);

/// Fraction of called DEGs that are not truly DE; 0 when nothing is called.
double observed_fdr(std::span<const DegRecord> degs, const SimTruth& truth);

struct UniqueDegMetrics {
  std::size_t n_unique = 0;
  std::size_t n_true_positive = 0;
  std::size_t n_direction_correct = 0;
  /// Guarded ratios: 0 when the denominator is 0.
  double tp_proportion = 0.0;
  double direction_correct_proportion = 0.0;
};

/// Compares a method's DEGs with the IN DEGs of the same trial.
UniqueDegMetrics unique_deg_metrics(std::span<const DegRecord> method_degs, std::span<const DegRecord> in_degs,
                                    const SimTruth& truth);

struct MethodTrialMetrics {
  Method method = Method::FIN;
  double auc = 0.0;
  double observed_fdr = 0.0;
  std::size_t n_degs = 0;
  std::size_t n_conflicting_degs = 0;
  UniqueDegMetrics unique;
};

struct TrialMetrics {
  std::size_t trial = 0;
  std::size_t n_genes = 0;
  std::size_t n_conflicting_genes = 0;
  std::size_t n_true_degs = 0;
  std::vector<MethodTrialMetrics> methods;
};

struct MethodSummary {
  Method method = Method::FIN;
  AucSummary auc;
  double mean_observed_fdr = 0.0;
  double mean_degs = 0.0;
  double mean_conflicting_degs = 0.0;
  std::size_t max_conflicting_degs = 0;
  double mean_unique = 0.0;
  /// Averaged over trials with at least one unique DEG.
  double mean_unique_tp_proportion = 0.0;
  std::size_t trials_with_unique = 0;
  /// Averaged over trials with at least one unique true positive.
  double mean_unique_direction_correct = 0.0;
  std::size_t trials_with_unique_tp = 0;
  RocCurve mean_roc;
};

struct EvalReport {
  std::string label;
  SimConfig config;
  DegCriteria criteria;
  double mean_genes = 0.0;
  double mean_conflicting_genes = 0.0;
  double mean_true_degs = 0.0;
  std::vector<MethodSummary> methods;
  std::vector<TrialMetrics> trials;

  const MethodSummary& summary(Method method) const;
};

/// Everything a single simulated trial produces, kept for inspection.
struct TrialOutcome {
  SimTruth truth;
  std::vector<GeneEvidence> evidence;
  std::vector<std::vector<CombinedResult>> results;  // per method, evidence order
  std::vector<std::vector<DegRecord>> degs;          // per method
  std::vector<RocCurve> curves;                      // per method
  TrialMetrics metrics;
};

/// Simulate, test per study, combine with every method, call DEGs, score.
/// IN is always computed internally as the reference for unique-DEG metrics.
TrialOutcome run_trial(const SimConfig& config, std::span<const Method> methods, const DegCriteria& criteria,
                       std::size_t trial_index);

/// All trials of a setting; trials run concurrently, aggregation is ordered.
EvalReport run_experiment(const SimConfig& config, std::span<const Method> methods, const DegCriteria& criteria,
                          unsigned threads = 1, std::string label = {});

nlohmann::json to_json(const EvalReport& report);

/// Draws n pairs (U, B) with U uniform and B a fair sign, and returns the KS
/// distance between the sample B |Phi^-1(1 - U)| and the standard normal.
double signed_quantile_ks(std::size_t n, std::uint64_t seed);

/// Counts of values in [k/bins, (k+1)/bins); 1.0 lands in the last bin.
std::vector<std::size_t> unit_histogram(std::span<const double> values, std::size_t bins = 20);

}  // namespace finmeta

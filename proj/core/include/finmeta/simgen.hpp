#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "finmeta/combine.hpp"
#include "finmeta/counts.hpp"

namespace finmeta {

/**
 * Multi-study negative-binomial simulation setting.
 *
 * Gene means in the control condition are log-normal, a `prop_de` fraction of
 * genes gets a log2 fold change drawn uniformly from +/-[fc_min, fc_max], and
 * every (gene, condition, study) mean is perturbed by exp(eps), eps ~ N(0, sigma^2).
 */
struct SimConfig {
  double sigma = 0.15;
  std::vector<StudyMeta> studies;
  std::size_t n_genes = 2000;
  double prop_de = 0.35;
  double base_mean_log_mu = 5.0;
  double base_mean_log_sd = 1.5;
  double fc_min = 1.0;
  double fc_max = 3.0;
  double disp_log_mu = -1.6;
  double disp_log_sd = 0.5;
  std::uint64_t seed = 1;
  std::size_t n_trials = 20;

  void validate() const;
};

/// The four benchmark settings: 1 and 2 use sigma = 0.15 with three and
/// five studies, 3 and 4 repeat those study sets with sigma = 0.5.
SimConfig table1_setting(int id);

struct GeneTruth {
  bool is_de = false;
  int true_direction = +1;
  double delta = 0.0;
  double theta_case = 0.0;
  double theta_control = 0.0;
};

struct SimTruth {
  std::vector<std::string> gene_ids;
  std::vector<GeneTruth> genes;

  std::size_t n_de() const;
  /// Index of a gene id; throws std::domain_error when unknown.
  std::size_t index_of(const std::string& gene_id) const;
};

struct StudyCounts {
  std::string study_id;
  CountsMatrix counts;
  /// Realized NB means per gene after the study effect.
  std::vector<double> mu_case;
  std::vector<double> mu_control;
  std::vector<double> dispersion;
};

/// Deterministic 64-bit engine for a keyed substream. Distinct keys give
/// statistically independent streams.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream,
                            std::uint64_t a = 0, std::uint64_t b = 0);

/// One NB(mean, dispersion) draw (variance mean + dispersion * mean^2) as a
/// gamma-mixed Poisson.
std::uint64_t sample_negative_binomial(std::mt19937_64& rng, double mean, double dispersion);

std::string simulated_gene_id(std::size_t index);

SimTruth sample_truth(const SimConfig& config, std::uint64_t trial_index);

/// Count matrices for every study in `config.studies`. Each (gene, study)
/// pair uses its own substream, so `threads` never changes the output.
std::vector<StudyCounts> simulate_counts(const SimTruth& truth, const SimConfig& config, std::uint64_t trial_index,
                                         unsigned threads = 1);

}  // namespace finmeta

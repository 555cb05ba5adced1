#include "finmeta/simgen.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "finmeta/parallel.hpp"

namespace finmeta {

namespace {

enum Stream : std::uint64_t { kTruthStream = 1, kCountStream = 2 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

void SimConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::domain_error("SimConfig: sigma must be >= 0");
  if (studies.empty()) throw std::domain_error("SimConfig: at least one study is required");
  Manifest check(studies);
  if (n_genes == 0) throw std::domain_error("SimConfig: n_genes must be positive");
  if (!(prop_de > 0.0 && prop_de < 1.0)) throw std::domain_error("SimConfig: prop_de must lie in (0, 1)");
  if (!(base_mean_log_sd > 0.0) || !(disp_log_sd > 0.0)) {
    throw std::domain_error("SimConfig: log-normal spreads must be positive");
  }
  if (!std::isfinite(base_mean_log_mu) || !std::isfinite(disp_log_mu)) {
    throw std::domain_error("SimConfig: log-normal locations must be finite");
  }
  if (!(fc_min >= 0.0 && fc_min <= fc_max) || !std::isfinite(fc_max)) {
    throw std::domain_error("SimConfig: fold-change range must satisfy 0 <= fc_min <= fc_max");
  }
  if (n_trials == 0) throw std::domain_error("SimConfig: n_trials must be positive");
}

SimConfig table1_setting(int id) {
  const std::vector<StudyMeta> three{{"study1", 10, 10}, {"study2", 15, 10}, {"study3", 12, 16}};
  std::vector<StudyMeta> five = three;
  five.push_back({"study4", 14, 12});
  five.push_back({"study5", 20, 20});

  SimConfig cfg;
  switch (id) {
    case 1: cfg.sigma = 0.15; cfg.studies = three; break;
    case 2: cfg.sigma = 0.15; cfg.studies = five; break;
    case 3: cfg.sigma = 0.5; cfg.studies = three; break;
    case 4: cfg.sigma = 0.5; cfg.studies = five; break;
    default: throw std::invalid_argument(fmt::format("unknown setting {} (expected 1-4)", id));
  }
  return cfg;
}

std::size_t SimTruth::n_de() const {
  std::size_t n = 0;
  for (const auto& g : genes) n += g.is_de ? 1 : 0;
  return n;
}

std::size_t SimTruth::index_of(const std::string& gene_id) const {
  // Simulated ids are positional; fall back to a scan for anything else.
  if (gene_id.size() > 4 && gene_id.starts_with("gene")) {
    std::size_t idx = 0;
    bool digits = true;
    for (std::size_t i = 4; i < gene_id.size(); ++i) {
      const char c = gene_id[i];
      if (c < '0' || c > '9') { digits = false; break; }
      idx = idx * 10 + static_cast<std::size_t>(c - '0');
    }
    if (digits && idx >= 1 && idx <= gene_ids.size() && gene_ids[idx - 1] == gene_id) return idx - 1;
  }
  for (std::size_t i = 0; i < gene_ids.size(); ++i) {
    if (gene_ids[i] == gene_id) return i;
  }
  throw std::domain_error("gene '" + gene_id + "' is not part of the simulation truth");
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream, std::uint64_t a,
                            std::uint64_t b) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ trial);
  key = splitmix64(key ^ stream);
  key = splitmix64(key ^ a);
  key = splitmix64(key ^ b);
  return std::mt19937_64(key);
}

std::uint64_t sample_negative_binomial(std::mt19937_64& rng, double mean, double dispersion) {
  if (!(mean >= 0.0) || !(dispersion > 0.0)) throw std::domain_error("negative binomial: invalid parameters");
  if (mean == 0.0) return 0;
  const double shape = 1.0 / dispersion;
  std::gamma_distribution<double> gamma(shape, mean * dispersion);
  const double lambda = gamma(rng);
  if (lambda <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> poisson(lambda);
  return poisson(rng);
}

std::string simulated_gene_id(std::size_t index) { return fmt::format("gene{:06d}", index + 1); }

SimTruth sample_truth(const SimConfig& config, std::uint64_t trial_index) {
  config.validate();
  auto rng = make_stream(config.seed, trial_index, kTruthStream);
  std::lognormal_distribution<double> base(config.base_mean_log_mu, config.base_mean_log_sd);
  std::bernoulli_distribution de(config.prop_de);
  std::bernoulli_distribution up(0.5);
  std::uniform_real_distribution<double> magnitude(config.fc_min, config.fc_max);

  SimTruth truth;
  truth.gene_ids.reserve(config.n_genes);
  truth.genes.reserve(config.n_genes);
  for (std::size_t g = 0; g < config.n_genes; ++g) {
    GeneTruth t;
    t.theta_control = base(rng);
    t.is_de = de(rng);
    if (t.is_de) {
      t.true_direction = up(rng) ? +1 : -1;
      double m = magnitude(rng);
      // Degenerate fc range [0, 0] cannot produce DE; keep the invariant is_de <=> delta != 0.
      if (m == 0.0) {
        t.is_de = false;
        t.true_direction = +1;
      }
      t.delta = t.true_direction * m;
    }
    t.theta_case = t.is_de ? t.theta_control * std::exp2(t.delta) : t.theta_control;
    truth.gene_ids.push_back(simulated_gene_id(g));
    truth.genes.push_back(t);
  }
  return truth;
}

std::vector<StudyCounts> simulate_counts(const SimTruth& truth, const SimConfig& config, std::uint64_t trial_index,
                                         unsigned threads) {
  config.validate();
  const std::size_t n_genes = truth.genes.size();
  if (n_genes != config.n_genes || truth.gene_ids.size() != n_genes) {
    throw std::domain_error("simulate_counts: truth does not match the configuration");
  }

  std::vector<StudyCounts> out;
  out.reserve(config.studies.size());
  for (std::size_t s = 0; s < config.studies.size(); ++s) {
    const auto& study = config.studies[s];
    const auto n_case = static_cast<std::size_t>(study.replicates_case);
    const auto n_ctrl = static_cast<std::size_t>(study.replicates_control);
    const std::size_t n_samples = n_case + n_ctrl;

    std::vector<std::string> sample_ids;
    std::vector<Condition> conditions;
    for (std::size_t r = 0; r < n_case; ++r) {
      sample_ids.push_back(fmt::format("case_{}", r + 1));
      conditions.push_back(Condition::Case);
    }
    for (std::size_t r = 0; r < n_ctrl; ++r) {
      sample_ids.push_back(fmt::format("control_{}", r + 1));
      conditions.push_back(Condition::Control);
    }

    std::vector<std::uint64_t> data(n_genes * n_samples);
    std::vector<double> mu_case(n_genes), mu_ctrl(n_genes), disp(n_genes);
    parallel_for(n_genes, threads, [&](std::size_t g) {
      auto rng = make_stream(config.seed, trial_index, kCountStream, s, g);
      std::normal_distribution<double> effect(0.0, 1.0);
      std::lognormal_distribution<double> dispersion(config.disp_log_mu, config.disp_log_sd);
      const auto& t = truth.genes[g];
      const double phi = dispersion(rng);
      const double eps_case = config.sigma * effect(rng);
      const double eps_ctrl = config.sigma * effect(rng);
      const double mc = config.sigma == 0.0 ? t.theta_case : t.theta_case * std::exp(eps_case);
      const double mk = config.sigma == 0.0 ? t.theta_control : t.theta_control * std::exp(eps_ctrl);
      mu_case[g] = mc;
      mu_ctrl[g] = mk;
      disp[g] = phi;
      std::uint64_t* row = data.data() + g * n_samples;
      for (std::size_t j = 0; j < n_samples; ++j) {
        row[j] = sample_negative_binomial(rng, j < n_case ? mc : mk, phi);
      }
    });

    out.push_back(StudyCounts{study.study_id,
                              CountsMatrix(truth.gene_ids, std::move(sample_ids), std::move(conditions), std::move(data)),
                              std::move(mu_case), std::move(mu_ctrl), std::move(disp)});
  }
  return out;
}

}  // namespace finmeta

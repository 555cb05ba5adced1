// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "commands.hpp"
#include "finmeta/combine.hpp"
#include "finmeta/detest.hpp"
#include "finmeta/evalharness.hpp"
#include "finmeta/io.hpp"
#include "finmeta/normstats.hpp"
#include "finmeta/parallel.hpp"
#include "finmeta/simgen.hpp"
#include "oracles.hpp"

using namespace finmeta;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << fmt::format("AC{:<2} {} {}: {}", id, pass ? "PASS" : "FAIL", name, detail) << std::endl;
}

const Manifest& setting1_manifest() {
  static const Manifest m(table1_setting(1).studies);
  return m;
}

std::vector<GeneEvidence> random_genes(const Manifest& manifest, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution present(0.8);
  std::bernoulli_distribution up(0.5);
  std::vector<GeneEvidence> genes(n);
  for (std::size_t g = 0; g < n; ++g) {
    genes[g].gene_id = "g" + std::to_string(g);
    while (genes[g].entries.empty()) {
      for (std::size_t s = 0; s < manifest.size(); ++s) {
        if (present(rng)) genes[g].entries.push_back({s, u(rng), (up(rng) ? 1.0 : -1.0) * (0.1 + 3.0 * u(rng))});
      }
    }
  }
  return genes;
}

// Largest deviation of sum w^2 from one over the genes of a batch.
double weight_deviation(std::span<const GeneEvidence> genes, const Manifest& manifest) {
  double worst = 0.0;
  std::vector<std::size_t> present;
  for (const auto& g : genes) {
    present.clear();
    for (const auto& e : g.entries) present.push_back(e.study);
    double sum = 0.0;
    for (double w : study_weights(manifest, present)) sum += w * w;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

double weight_worst = 0.0;

void signed_quantile_normality() {
  const auto t0 = Clock::now();
  const double ks = signed_quantile_ks(100000, 1);
  const double t = seconds_since(t0);
  report(1, ks < 0.006 && t < 5.0, "signed-quantile normality",
         fmt::format("ks={:.5f} (< 0.006), {:.2f}s (< 5s)", ks, t));
}

void combiner_null_calibration() {
  const auto& m = setting1_manifest();
  const auto t0 = Clock::now();
  const auto genes = random_genes(m, 100000, 2024);
  bool ok = true;
  std::string detail;
  for (auto method : {Method::IN, Method::MIN, Method::FIN}) {
    const auto out = combine_batch(genes, m, method);
    std::vector<double> p;
    p.reserve(out.size());
    std::size_t rejected = 0;
    for (const auto& r : out) {
      p.push_back(r.p_combined);
      rejected += r.p_combined < 0.05 ? 1 : 0;
    }
    const double ks = ks_uniform_stat(p);
    const double rate = static_cast<double>(rejected) / static_cast<double>(p.size());
    ok = ok && ks < 0.006 && rate >= 0.04 && rate <= 0.06;
    detail += fmt::format("{} ks={:.5f} rate={:.4f}; ", to_string(method), ks, rate);
  }
  const double t = seconds_since(t0);
  ok = ok && t < 10.0;
  weight_worst = std::max(weight_worst, weight_deviation(genes, m));
  report(2, ok, "combiner null calibration", detail + fmt::format("{:.2f}s (< 10s)", t));
}

void fin_branch_equivalence() {
  const auto& m = setting1_manifest();
  const auto genes = random_genes(m, 10000, 99);
  std::size_t mismatches = 0;
  std::size_t concordant = 0;
  for (const auto& g : genes) {
    const auto fin = combine_fin(g, m);
    const auto ref = fin.concordant ? combine_in(g, m) : combine_min(g, m);
    concordant += fin.concordant ? 1 : 0;
    if (fin.n_g != ref.n_g || fin.p_combined != ref.p_combined) ++mismatches;
  }
  weight_worst = std::max(weight_worst, weight_deviation(genes, m));
  report(3, mismatches == 0, "FIN branch equivalence",
         fmt::format("{} mismatches over {} concordant + {} discordant genes", mismatches, concordant,
                     genes.size() - concordant));
}

void weight_identity() {
  const auto w = study_weights(setting1_manifest(), std::vector<std::size_t>{0, 1, 2});
  const std::vector<double> expected{0.52343, 0.58520, 0.61932};
  double worst_ref = 0.0;
  for (std::size_t i = 0; i < 3; ++i) worst_ref = std::max(worst_ref, std::abs(w[i] - expected[i]));
  report(4, weight_worst <= 1e-12 && worst_ref <= 1e-5, "weight identity",
         fmt::format("max |sum w^2 - 1|={:.2e} (<= 1e-12); weights ({:.5f}, {:.5f}, {:.5f}) max err {:.1e}",
                     weight_worst, w[0], w[1], w[2], worst_ref));
}

void bh_oracle() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 50);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution tie(0.2);
  std::size_t mismatches = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> p(len(rng));
    for (auto& x : p) x = u(rng);
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (tie(rng)) p[i] = p[i - 1];
    }
    if (bh_adjust(p) != oracle::bh(p)) ++mismatches;
  }
  report(5, mismatches == 0, "BH oracle equivalence", fmt::format("{} of 1000 vectors differ", mismatches));
}

void benchmark_criteria() {
  const std::vector<Method> methods{Method::IN, Method::MIN, Method::FIN};
  const unsigned threads = resolve_threads(0);
  std::vector<EvalReport> reports;
  const auto t0 = Clock::now();
  for (int id = 1; id <= 4; ++id) {
    auto cfg = table1_setting(id);
    cfg.n_genes = 2000;
    cfg.n_trials = 20;
    reports.push_back(run_experiment(cfg, methods, {}, threads, fmt::format("setting{}", id)));
  }
  const double t = seconds_since(t0);

  bool ordering = t < 600.0;
  bool fdr = true;
  bool in_exclusion = true;
  std::string order_detail;
  std::string fdr_detail;
  std::size_t in_conflicts = 0;
  for (const auto& r : reports) {
    const double in = r.summary(Method::IN).auc.mean;
    const double min = r.summary(Method::MIN).auc.mean;
    const double fin = r.summary(Method::FIN).auc.mean;
    ordering = ordering && min <= in + 0.005 && in <= fin + 0.005;
    order_detail += fmt::format("{} IN={:.4f} MIN={:.4f} FIN={:.4f}; ", r.label, in, min, fin);
    fdr_detail += r.label;
    for (const auto& m : r.methods) {
      fdr = fdr && m.mean_observed_fdr < 0.07;
      fdr_detail += fmt::format(" {}={:.4f}", to_string(m.method), m.mean_observed_fdr);
    }
    fdr_detail += "; ";
    for (const auto& trial : r.trials) {
      for (const auto& m : trial.methods) {
        if (m.method == Method::IN) in_conflicts += m.n_conflicting_degs;
      }
    }
  }
  in_exclusion = in_conflicts == 0;
  report(6, ordering, "AUC ordering (MIN <= IN + 0.005, IN <= FIN + 0.005)",
         order_detail + fmt::format("{:.0f}s (< 600s)", t));
  report(7, fdr, "observed FDR < 0.07", fdr_detail);

  const auto& fin4 = reports[3].summary(Method::FIN);
  const bool unique_ok = fin4.mean_unique_tp_proportion >= 0.8 && fin4.mean_unique_direction_correct >= 0.75;
  report(8, unique_ok, "FIN-unique DEG quality (sigma=0.5, 5 studies)",
         fmt::format("TP proportion {:.3f} (>= 0.8) over {} trials with unique DEGs; direction-correct {:.3f} "
                     "(>= 0.75) over {} trials; mean unique {:.1f}",
                     fin4.mean_unique_tp_proportion, fin4.trials_with_unique, fin4.mean_unique_direction_correct,
                     fin4.trials_with_unique_tp, fin4.mean_unique));
  report(9, in_exclusion, "IN conflicting-direction DEGs",
         fmt::format("{} conflicting IN DEGs over {} trials", in_conflicts, 4 * 20));
}

void per_study_calibration() {
  SimConfig cfg;
  cfg.sigma = 0.0;
  cfg.studies = {{"null", 10, 10}};
  cfg.n_genes = 10000;
  cfg.seed = 1;
  auto truth = sample_truth(cfg, 0);
  for (auto& t : truth.genes) {
    t.is_de = false;
    t.delta = 0.0;
    t.true_direction = +1;
    t.theta_case = t.theta_control;
  }
  const auto study = simulate_counts(truth, cfg, 0)[0];
  std::vector<double> p;
  for (const auto& r : run_per_study(study.counts)) {
    if (r.p_raw) p.push_back(*r.p_raw);
  }
  const double ks = ks_uniform_stat(p);
  const double rate =
      static_cast<double>(std::count_if(p.begin(), p.end(), [](double x) { return x < 0.05; })) / p.size();
  report(10, ks < 0.02 && rate >= 0.03 && rate <= 0.07, "per-study null calibration",
         fmt::format("{} tested genes, ks={:.4f} (< 0.02), rejection {:.4f} (in [0.03, 0.07])", p.size(), ks, rate));
}

void evaluate_determinism() {
  const auto root = fs::temp_directory_path() / "finmeta_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> outputs;
  bool ran = true;
  for (const std::string threads : {"1", "2", "8"}) {
    const auto dir = root / ("t" + threads);
    std::ostringstream out, err;
    const int code = cli::run({"evaluate", "--setting", "all", "--trials", "2", "--seed", "42", "--threads", threads,
                               "--out", dir.string()},
                              out, err);
    ran = ran && code == 0;
    std::string bytes;
    if (code == 0) {
      bytes = io::read_file(dir / "report.json");
      for (int id = 1; id <= 4; ++id) {
        for (const std::string m : {"IN", "MIN", "FIN"}) {
          bytes += io::read_file(dir / fmt::format("roc_setting{}_{}.tsv", id, m));
        }
      }
    }
    outputs.push_back(std::move(bytes));
  }
  fs::remove_all(root);
  const bool same = ran && outputs[0] == outputs[1] && outputs[0] == outputs[2];
  report(11, same, "evaluate determinism across 1/2/8 threads",
         fmt::format("report + 12 ROC files, {} bytes, {}", outputs[0].size(), same ? "identical" : "differ"));
}

void quantile_round_trip() {
  double worst = 0.0;
  for (int i = -600; i <= 600; ++i) {
    const double x = i * 0.01;
    worst = std::max(worst, std::abs(std_normal_quantile(std_normal_cdf(x)) - x));
  }
  report(12, worst < 1e-8, "quantile round trip on [-6, 6]", fmt::format("max error {:.2e} (< 1e-8)", worst));
}

}  // namespace

int main() {
  signed_quantile_normality();
  combiner_null_calibration();
  fin_branch_equivalence();
  weight_identity();
  bh_oracle();
  benchmark_criteria();
  per_study_calibration();
  evaluate_determinism();
  quantile_round_trip();
  std::cout << fmt::format("{} of 12 criteria failed", failures) << std::endl;
  return failures == 0 ? 0 : 1;
}

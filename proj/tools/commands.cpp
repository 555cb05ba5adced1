#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>

#include "finmeta/combine.hpp"
#include "finmeta/degcall.hpp"
#include "finmeta/detest.hpp"
#include "finmeta/evalharness.hpp"
#include "finmeta/io.hpp"
#include "finmeta/normstats.hpp"
#include "finmeta/parallel.hpp"
#include "finmeta/simgen.hpp"

namespace fs = std::filesystem;

namespace finmeta::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kTheoremKsThreshold = 0.006;
constexpr double kStudyKsThreshold = 0.02;

struct CombineArgs {
  std::string manifest;
  std::string stats;
  std::string method = "fin";
  double alpha = 0.05;
  double lfc = 1.0;
  std::string out;
  std::string results;
  std::string weights;
  unsigned threads = 0;
};

struct SimArgs {
  std::string setting;
  std::optional<double> sigma;
  std::string studies;
  std::optional<std::size_t> genes;
  std::optional<double> prop_de;
  std::uint64_t seed = 1;
  std::size_t trial = 0;
  std::size_t trials = 20;
  std::string out;
  unsigned threads = 0;
  double alpha = 0.05;
  double lfc = 1.0;
};

struct PerStudyArgs {
  std::string counts;
  std::string conditions;
  std::string study_id;
  double cpm_threshold = kDefaultCpmThreshold;
  std::string out;
  bool append = false;
  unsigned threads = 0;
};

struct CheckArgs {
  std::string stats;
  std::size_t mc_n = 100000;
  std::uint64_t seed = 1;
};

std::vector<StudyMeta> parse_study_spec(const std::string& spec) {
  std::vector<StudyMeta> studies;
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError(fmt::format("bad --studies entry '{}' (expected CASE:CONTROL)", item));
    int cases = 0;
    int controls = 0;
    try {
      std::size_t used = 0;
      cases = std::stoi(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("trailing");
      const auto rest = item.substr(colon + 1);
      controls = std::stoi(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError(fmt::format("bad --studies entry '{}' (expected CASE:CONTROL)", item));
    }
    if (cases < 1 || controls < 1) throw UsageError("--studies replicate counts must be positive");
    studies.push_back({fmt::format("study{}", studies.size() + 1), cases, controls});
  }
  if (studies.empty()) throw UsageError("--studies lists no studies");
  return studies;
}

int parse_setting_id(const std::string& text) {
  if (text.size() == 1 && text[0] >= '1' && text[0] <= '4') return text[0] - '0';
  throw UsageError(fmt::format("invalid setting '{}' (expected 1, 2, 3 or 4)", text));
}

SimConfig build_config(const SimArgs& a, std::optional<int> setting) {
  SimConfig cfg;
  if (setting) {
    cfg = table1_setting(*setting);
  } else if (a.studies.empty()) {
    throw UsageError("either --setting or --studies is required");
  }
  if (!a.studies.empty()) cfg.studies = parse_study_spec(a.studies);
  if (a.sigma) cfg.sigma = *a.sigma;
  if (a.genes) cfg.n_genes = *a.genes;
  if (a.prop_de) cfg.prop_de = *a.prop_de;
  cfg.seed = a.seed;
  cfg.n_trials = a.trials;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

Method method_arg(const std::string& text) {
  try {
    return parse_method(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

DegCriteria criteria_arg(double alpha, double lfc) {
  DegCriteria c{alpha, lfc};
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return c;
}

template <typename Parser>
auto parse_path(const std::string& path, Parser parser) {
  std::istringstream in(io::read_file(path));
  return parser(in, path);
}

int cmd_combine(const CombineArgs& a, std::ostream& out) {
  const Method method = method_arg(a.method);
  const DegCriteria criteria = criteria_arg(a.alpha, a.lfc);

  Manifest manifest = parse_path(a.manifest, [](std::istream& in, const std::string& src) {
    return io::parse_manifest(in, src);
  });
  if (!a.weights.empty()) {
    const auto weights = parse_path(a.weights, [](std::istream& in, const std::string& src) {
      return io::parse_weights(in, src);
    });
    try {
      manifest.set_weight_override(weights);
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("{}: {}", a.weights, e.what()));
    }
  }
  const auto genes = parse_path(a.stats, [&](std::istream& in, const std::string& src) {
    return io::parse_summary_stats(in, manifest, src);
  });

  const auto results = combine_batch(genes, manifest, method, resolve_threads(a.threads));
  const auto degs = call_degs(results, criteria, method);

  const std::string results_path = a.results.empty() ? a.out + ".all.tsv" : a.results;
  io::write_file_atomic(a.out, io::format_deg_table(degs));
  io::write_file_atomic(results_path, io::format_results(results));
  fmt::print(out, "{}: {} DEGs out of {} genes -> {}\n", to_string(method), degs.size(), results.size(), a.out);
  return 0;
}

int cmd_simulate(const SimArgs& a, std::ostream& out) {
  std::optional<int> setting;
  if (!a.setting.empty()) setting = parse_setting_id(a.setting);
  const SimConfig cfg = build_config(a, setting);

  const auto truth = sample_truth(cfg, a.trial);
  const auto studies = simulate_counts(truth, cfg, a.trial, resolve_threads(a.threads));

  const fs::path dir(a.out);
  fs::create_directories(dir);
  io::write_file_atomic(dir / "manifest.tsv", io::format_manifest(Manifest(cfg.studies)));
  io::write_file_atomic(dir / "truth.tsv", io::format_truth(truth));
  for (const auto& s : studies) {
    io::write_file_atomic(dir / (s.study_id + ".counts.tsv"), io::format_counts(s.counts));
    io::write_file_atomic(dir / (s.study_id + ".conditions.tsv"), io::format_conditions(s.counts));
  }
  fmt::print(out, "simulated {} genes ({} DE) in {} studies, sigma={} -> {}\n", truth.genes.size(), truth.n_de(),
             studies.size(), io::format_real(cfg.sigma), dir.string());
  return 0;
}

int cmd_per_study(const PerStudyArgs& a, std::ostream& out) {
  if (!(a.cpm_threshold >= 0.0)) throw UsageError("--cpm-threshold must be non-negative");
  std::istringstream counts(io::read_file(a.counts));
  std::istringstream conditions(io::read_file(a.conditions));
  const auto matrix = io::parse_counts(counts, conditions, a.counts, a.conditions);

  PerStudyOptions options;
  options.cpm_threshold = a.cpm_threshold;
  const auto results = run_per_study(matrix, options, resolve_threads(a.threads));

  std::string existing;
  std::string existing_filtered;
  const std::string filtered_path = a.out + ".filtered.txt";
  if (a.append && fs::exists(a.out)) {
    existing = io::read_file(a.out);
    if (!existing.empty() && existing.rfind(std::string(io::kStatsHeader) + "\n", 0) != 0) {
      throw io::ParseError(a.out, 1, "cannot append: existing file has an unexpected header");
    }
    if (fs::exists(filtered_path)) existing_filtered = io::read_file(filtered_path);
  }

  std::string filtered = existing_filtered.empty() ? "gene_id\tstudy_id\n" : existing_filtered;
  std::size_t n_filtered = 0;
  for (const auto& r : results) {
    if (!r.filtered) continue;
    filtered += fmt::format("{}\t{}\n", r.gene_id, a.study_id);
    ++n_filtered;
  }
  io::write_file_atomic(a.out, existing + io::format_per_study_rows(a.study_id, results, existing.empty()));
  io::write_file_atomic(filtered_path, filtered);
  fmt::print(out, "{}: {} genes tested, {} filtered -> {}\n", a.study_id, results.size() - n_filtered, n_filtered,
             a.out);
  return 0;
}

std::string setting_label(int id) { return fmt::format("setting{}", id); }

int cmd_evaluate(const SimArgs& a, std::ostream& out) {
  const DegCriteria criteria = criteria_arg(a.alpha, a.lfc);
  std::vector<std::pair<std::string, SimConfig>> runs;
  if (a.setting == "all") {
    for (int id = 1; id <= 4; ++id) runs.emplace_back(setting_label(id), build_config(a, id));
  } else if (!a.setting.empty()) {
    const int id = parse_setting_id(a.setting);
    runs.emplace_back(setting_label(id), build_config(a, id));
  } else {
    runs.emplace_back("custom", build_config(a, std::nullopt));
  }
  if (a.trials == 0) throw UsageError("--trials must be positive");

  const std::vector<Method> methods{Method::IN, Method::MIN, Method::FIN};
  const unsigned threads = resolve_threads(a.threads);
  const fs::path dir(a.out);
  fs::create_directories(dir);

  nlohmann::json reports = nlohmann::json::array();
  for (const auto& [label, cfg] : runs) {
    const auto report = run_experiment(cfg, methods, criteria, threads, label);
    reports.push_back(to_json(report));
    for (const auto& m : report.methods) {
      io::write_file_atomic(dir / fmt::format("roc_{}_{}.tsv", label, to_string(m.method)),
                            io::format_roc(m.mean_roc));
      fmt::print(out, "{:<10}{:<5}auc {:.4f} +/- {:.4f}  fdr {:.4f}  degs {:.1f}  conflicting {:.1f}  unique {:.1f}\n",
                 label, to_string(m.method), m.auc.mean, m.auc.std, m.mean_observed_fdr, m.mean_degs,
                 m.mean_conflicting_degs, m.mean_unique);
    }
  }
  io::write_file_atomic(dir / "report.json", reports.dump(2) + "\n");
  return 0;
}

std::vector<StudyMeta> study_ids_in_stats(const std::string& text) {
  std::vector<StudyMeta> studies;
  std::unordered_set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto first = line.find('\t');
    if (first == std::string::npos) continue;
    const auto second = line.find('\t', first + 1);
    auto id = line.substr(first + 1, second == std::string::npos ? std::string::npos : second - first - 1);
    if (id.empty()) continue;
    if (seen.insert(id).second) studies.push_back({std::move(id), 1, 1});
  }
  return studies;
}

int cmd_check(const CheckArgs& a, std::ostream& out) {
  if (a.mc_n == 0) throw UsageError("--mc-n must be positive");
  const double ks = signed_quantile_ks(a.mc_n, a.seed);
  fmt::print(out, "signed-quantile normality: n={} ks={:.6f} threshold={} {}\n", a.mc_n, ks, kTheoremKsThreshold,
             ks < kTheoremKsThreshold ? "PASS" : "FAIL");
  if (a.stats.empty()) return 0;

  const std::string text = io::read_file(a.stats);
  auto studies = study_ids_in_stats(text);
  if (studies.empty()) {
    fmt::print(out, "{}: no rows\n", a.stats);
    return 0;
  }
  const Manifest manifest(studies);
  std::istringstream in(text);
  const auto genes = io::parse_summary_stats(in, manifest, a.stats);

  std::vector<std::vector<double>> by_study(manifest.size());
  for (const auto& g : genes) {
    for (const auto& e : g.entries) by_study[e.study].push_back(e.p_raw);
  }
  for (std::size_t s = 0; s < manifest.size(); ++s) {
    const double study_ks = ks_uniform_stat(by_study[s]);
    fmt::print(out, "{}: n={} ks={:.6f} threshold={} {}\n", manifest[s].study_id, by_study[s].size(), study_ks,
               kStudyKsThreshold, study_ks < kStudyKsThreshold ? "PASS" : "FAIL");
    const auto hist = unit_histogram(by_study[s], 20);
    fmt::print(out, "{}: histogram {}\n", manifest[s].study_id, fmt::join(hist, " "));
  }
  return 0;
}

void add_threads(CLI::App* app, unsigned& threads) {
  app->add_option("--threads", threads, "Worker threads (0: FINMETA_THREADS or 1)");
}

void add_sim_options(CLI::App* app, SimArgs& a) {
  app->add_option("--sigma", a.sigma, "Inter-study variability");
  app->add_option("--studies", a.studies, "Replicates per study, e.g. 10:10,15:10");
  app->add_option("--genes", a.genes, "Genes per trial");
  app->add_option("--prop-de", a.prop_de, "Proportion of DE genes");
  app->add_option("--seed", a.seed, "Master seed");
  app->add_option("--out", a.out, "Output directory")->required();
  add_threads(app, a.threads);
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Directional p-value combination for multi-study differential expression", "finmeta"};
  app.require_subcommand(1);

  CombineArgs combine_args;
  auto* combine = app.add_subcommand("combine", "Combine per-study summary statistics and call DEGs");
  combine->add_option("--manifest", combine_args.manifest, "Study manifest")->required();
  combine->add_option("--stats", combine_args.stats, "Per-study summary statistics")->required();
  combine->add_option("--method", combine_args.method, "in, min or fin")->capture_default_str();
  combine->add_option("--alpha", combine_args.alpha, "BH level")->capture_default_str();
  combine->add_option("--lfc", combine_args.lfc, "Mean |log2 fold change| threshold")->capture_default_str();
  combine->add_option("--out", combine_args.out, "DEG table")->required();
  combine->add_option("--results", combine_args.results, "All-gene results (default: <out>.all.tsv)");
  combine->add_option("--weights", combine_args.weights, "Study weight override");
  add_threads(combine, combine_args.threads);

  SimArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Simulate one trial of multi-study counts");
  simulate->add_option("--setting", sim_args.setting, "Preset 1-4");
  simulate->add_option("--trial", sim_args.trial, "Trial index")->capture_default_str();
  add_sim_options(simulate, sim_args);

  PerStudyArgs ps_args;
  auto* per_study = app.add_subcommand("per-study", "Per-study negative binomial test");
  per_study->add_option("--counts", ps_args.counts, "Counts matrix")->required();
  per_study->add_option("--conditions", ps_args.conditions, "Sample conditions")->required();
  per_study->add_option("--study-id", ps_args.study_id, "Study id written to each row")->required();
  per_study->add_option("--cpm-threshold", ps_args.cpm_threshold, "CPM filter threshold")->capture_default_str();
  per_study->add_option("--out", ps_args.out, "Summary statistics output")->required();
  per_study->add_flag("--append", ps_args.append, "Append rows to an existing stats file");
  add_threads(per_study, ps_args.threads);

  SimArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Run the simulation benchmark");
  evaluate->add_option("--setting", eval_args.setting, "Preset 1-4 or all");
  evaluate->add_option("--trials", eval_args.trials, "Trials per setting")->capture_default_str();
  evaluate->add_option("--alpha", eval_args.alpha, "BH level")->capture_default_str();
  evaluate->add_option("--lfc", eval_args.lfc, "Mean |log2 fold change| threshold")->capture_default_str();
  add_sim_options(evaluate, eval_args);

  CheckArgs check_args;
  auto* check = app.add_subcommand("check", "Calibration self-checks");
  check->add_option("--stats", check_args.stats, "Summary statistics to inspect");
  check->add_option("--mc-n", check_args.mc_n, "Monte-Carlo draws")->capture_default_str();
  check->add_option("--seed", check_args.seed, "Seed")->capture_default_str();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*combine) return cmd_combine(combine_args, out);
    if (*simulate) return cmd_simulate(sim_args, out);
    if (*per_study) return cmd_per_study(ps_args, out);
    if (*evaluate) return cmd_evaluate(eval_args, out);
    if (*check) return cmd_check(check_args, out);
  } catch (const UsageError& e) {
    fmt::print(err, "usage error: {}\nRun with --help for more information.\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace finmeta::cli

#include <benchmark/benchmark.h>

#include <random>

#include "finmeta/combine.hpp"
#include "finmeta/detest.hpp"
#include "finmeta/evalharness.hpp"
#include "finmeta/normstats.hpp"
#include "finmeta/simgen.hpp"

using namespace finmeta;

namespace {

std::vector<GeneEvidence> random_genes(const Manifest& manifest, std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GeneEvidence> genes(n);
  for (std::size_t g = 0; g < n; ++g) {
    genes[g].gene_id = "g" + std::to_string(g);
    for (std::size_t s = 0; s < manifest.size(); ++s) genes[g].entries.push_back({s, u(rng), u(rng) - 0.5});
  }
  return genes;
}

void BM_NormalQuantile(benchmark::State& state) {
  double p = 1e-6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(std_normal_quantile(p));
    p = p < 0.999 ? p + 1e-3 : 1e-6;
  }
}
BENCHMARK(BM_NormalQuantile);

void BM_BhAdjust(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(state.range(0)));
  for (auto& x : p) x = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(bh_adjust(p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BhAdjust)->Arg(1000)->Arg(20000);

void BM_CombineBatch(benchmark::State& state) {
  const Manifest m(table1_setting(2).studies);
  const auto genes = random_genes(m, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(combine_batch(genes, m, Method::FIN));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CombineBatch)->Arg(20000);

void BM_NbLrtTest(benchmark::State& state) {
  auto rng = make_stream(3, 0, 0);
  std::vector<std::uint64_t> y(20);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = sample_negative_binomial(rng, j < 10 ? 300.0 : 150.0, 0.2);
  std::vector<Condition> cond(10, Condition::Case);
  cond.insert(cond.end(), 10, Condition::Control);
  const std::vector<double> sf(20, 1.0);
  LrtOptions opts;
  opts.prior_dispersion = 0.2;
  for (auto _ : state) benchmark::DoNotOptimize(nb_lrt_test(y, cond, sf, opts));
}
BENCHMARK(BM_NbLrtTest);

void BM_RunTrial(benchmark::State& state) {
  auto cfg = table1_setting(static_cast<int>(state.range(0)));
  const std::vector<Method> methods{Method::IN, Method::MIN, Method::FIN};
  for (auto _ : state) benchmark::DoNotOptimize(run_trial(cfg, methods, {}, 0));
}
BENCHMARK(BM_RunTrial)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

// Microbenchmarks for the hot paths: one composite-gradient step, pairwise
// featurization, candidate generation and PR-curve assembly.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "ertl/blocking.hpp"
#include "ertl/features.hpp"
#include "ertl/metrics.hpp"
#include "ertl/rng.hpp"
#include "ertl/solver.hpp"
#include "ertl/synth.hpp"

namespace {

ertl::Dataset bench_dataset(int n_sources, int pairs_per_source_pair) {
  ertl::SynthConfig cfg;
  cfg.n_sources = n_sources;
  cfg.n_entities = 500;
  cfg.dim = 5;
  cfg.pairs_per_source_pair = pairs_per_source_pair;
  cfg.test_pairs_total = 0;
  cfg.seed = 7;
  return ertl::generate(cfg).train;
}

void BM_TransferStep(benchmark::State& state) {
  const auto data = bench_dataset(static_cast<int>(state.range(0)), 100);
  ertl::TransferModel model;
  model.dim = data.dim;
  model.feature_names = data.feature_names;
  model.sources = data.sources;
  model.w0.assign(data.dim, 0.0);
  model.w.assign(data.sources.size(), std::vector<double>(data.dim, 0.0));
  const double gamma = 1.0 / ertl::estimate_lipschitz(data, true);
  for (auto _ : state) {
    model = ertl::transfer_step(model, data, gamma, 0.01);
    benchmark::DoNotOptimize(model.w0.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_TransferStep)->Arg(4)->Arg(10);

void BM_FitTransfer(benchmark::State& state) {
  const auto data = bench_dataset(4, static_cast<int>(state.range(0)));
  ertl::SolverConfig cfg;
  cfg.lambda_a = 0.01;
  cfg.tol = 1e-6;
  for (auto _ : state) {
    auto [model, trace] = ertl::fit_transfer(data, cfg);
    benchmark::DoNotOptimize(trace.iters.size());
  }
}
BENCHMARK(BM_FitTransfer)->Arg(50)->Arg(200);

void BM_FeaturizePair(benchmark::State& state) {
  ertl::RawRecord a;
  a.source = 0;
  a.id = "a1";
  a.title = "the empire of the falling sky part two";
  a.alt_titles = {"empire of the falling sky 2"};
  a.year = 1987;
  a.runtime = 126;
  a.cast = {"john carver", "mina hale", "victor osei", "lena brook"};
  a.directors = {"p t woodberry"};
  ertl::RawRecord b = a;
  b.source = 1;
  b.id = "b7";
  b.title = "empire of the falling sky ii";
  b.year = 1988;
  b.cast = {"john carver", "mina hale", "ruth adler"};
  const auto na = ertl::normalize_record(a);
  const auto nb = ertl::normalize_record(b);
  const auto spec = ertl::FeatureSpec::movie();
  for (auto _ : state) {
    auto x = ertl::featurize_pair(na, nb, spec);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_FeaturizePair);

void BM_GenerateCandidates(benchmark::State& state) {
  // Title vocabulary with a few hot tokens so blocks have realistic skew.
  const std::vector<std::string> words = {
      "dark",  "city",   "night",  "river", "storm", "echo",  "garden",
      "glass", "winter", "crown",  "blood", "star",  "omega", "silent",
      "last",  "first",  "hidden", "lost",  "iron",  "small"};
  ertl::Rng rng(13);
  std::vector<ertl::RawRecord> records;
  const int n = static_cast<int>(state.range(0));
  for (int k = 0; k < n; ++k) {
    ertl::RawRecord r;
    r.source = k % 3;
    r.id = "r" + std::to_string(k);
    r.title = words[rng.below(words.size())] + " " + words[rng.below(words.size())] +
              " " + std::to_string(rng.below(50));
    records.push_back(ertl::normalize_record(r));
  }
  ertl::BlockingConfig cfg;
  for (auto _ : state) {
    auto cands = ertl::generate_candidates(records, cfg);
    benchmark::DoNotOptimize(cands.size());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_GenerateCandidates)->Arg(1000)->Arg(4000);

void BM_PRCurve(benchmark::State& state) {
  ertl::Rng rng(29);
  std::vector<ertl::ScoredExample> scored;
  const int n = static_cast<int>(state.range(0));
  for (int k = 0; k < n; ++k) {
    ertl::ScoredExample ex;
    ex.y = rng.uniform01() < 0.5 ? +1 : -1;
    ex.score = rng.gaussian() + (ex.y > 0 ? 0.8 : 0.0);
    scored.push_back(ex);
  }
  for (auto _ : state) {
    auto curve = ertl::pr_curve(scored);
    benchmark::DoNotOptimize(curve.points.size());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_PRCurve)->Arg(10000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();

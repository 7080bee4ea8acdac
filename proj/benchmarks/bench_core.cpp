// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/attacks.hpp"
#include "graphpoison/graph.hpp"
#include "graphpoison/surrogate.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace graphpoison;

AttributedGraph bench_graph(int n) {
  SbmParams p;
  p.n = n;
  p.blocks = 2;
  p.p_in = 0.05;
  p.p_out = 0.005;
  p.feature_dim = 16;
  p.noise = 0.05;
  p.seed = 1;
  return generate_sbm(p);
}

void BM_normalize_adjacency(benchmark::State& state) {
  const AttributedGraph g = bench_graph(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(normalize_adjacency(g.adjacency));
}
BENCHMARK(BM_normalize_adjacency)->Arg(128)->Arg(512);

void BM_surrogate_train_plain(benchmark::State& state) {
  const AttributedGraph g = bench_graph(256);
  const DataSplit split = make_split(g, 0.1, 3);
  InnerTrainConfig cfg;
  cfg.steps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train_surrogate(g, split, cfg));
}
BENCHMARK(BM_surrogate_train_plain)->Arg(10)->Arg(100);

void BM_meta_gradient_exact(benchmark::State& state) {
  const AttributedGraph g = bench_graph(128);
  const DataSplit split = make_split(g, 0.1, 3);
  InnerTrainConfig cfg;
  cfg.steps = static_cast<int>(state.range(0));
  AttackerLossSpec spec;
  spec.variant = AttackerLossVariant::Train;
  for (auto _ : state)
    benchmark::DoNotOptimize(meta_gradient_exact(g, split, spec, cfg));
}
BENCHMARK(BM_meta_gradient_exact)->Arg(5)->Arg(20);

void BM_degree_test_incremental(benchmark::State& state) {
  const AttributedGraph g = bench_graph(512);
  ConstraintState cs(g, 1000, ConstraintToggles{});
  Perturbation p;
  p.kind = PerturbationKind::EdgeInsert;
  p.u = 0;
  p.v = 1;
  for (auto _ : state) benchmark::DoNotOptimize(cs.admissible(p));
}
BENCHMARK(BM_degree_test_incremental);

}  // namespace

BENCHMARK_MAIN();

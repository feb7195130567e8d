#include <benchmark/benchmark.h>

#include "ttsim/backend.hpp"
#include "ttsim/search_tree.hpp"
#include "ttsim/serial_search.hpp"
#include "ttsim/simulator.hpp"

namespace {

using namespace ttsim;

void BM_WuPuct(benchmark::State& state) {
  std::int64_t n = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(wu_puct_score(0.5, 0.25, n, 3, n / 2, 1, {}));
    n = n % 1000 + 1;
  }
}
BENCHMARK(BM_WuPuct);

// Selection on a grown tree, cancelled right away so the tree stays fixed.
void BM_SelectLeaf(benchmark::State& state) {
  WorkloadProfile deep;
  deep.unsolvable.depth_range = {8, 10};
  const auto w = make_workload(1, {0.0, 0.0, 1.0}, 3, deep);
  const SyntheticBackend backend(w[0]);
  SearchTree tree(backend.root_ref(), 1'000'000);
  for (int i = 0; i < state.range(0) && tree.has_expandable_leaf(); ++i) {
    const NodeId leaf = tree.select_leaf({});
    const NodeId end = simulate_to_terminal(tree, leaf, backend, {});
    Trajectory t;
    t.node_path = tree.path_from_root(end);
    t.node_path.erase(t.node_path.begin());
    t.aggregate_score = 0.5;
    tree.backpropagate(t);
  }
  if (!tree.has_expandable_leaf()) {
    state.SkipWithError("tree exhausted while growing");
    return;
  }
  for (auto _ : state) {
    const NodeId leaf = tree.select_leaf({});
    tree.cancel_inflight(tree.path_from_root(leaf));
  }
  state.counters["nodes"] = static_cast<double>(tree.size());
}
BENCHMARK(BM_SelectLeaf)->Arg(8)->Arg(32)->Arg(128);

void BM_SerialSearch(benchmark::State& state) {
  const auto w = make_workload(20, {}, 5);
  std::size_t i = 0;
  for (auto _ : state) {
    const SyntheticBackend backend(w[i++ % w.size()]);
    benchmark::DoNotOptimize(run_serial_search(backend, {}, {}, {}));
  }
}
BENCHMARK(BM_SerialSearch);

void BM_Simulate(benchmark::State& state) {
  const auto w = make_workload(static_cast<int>(state.range(0)), {}, 7);
  SimulationConfig config;
  for (auto _ : state) {
    const auto r = simulate(w, 8.0, config, 7);
    state.counters["events"] = static_cast<double>(r.stats.events);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <lcsc/evaluator.hpp>
#include <lcsc/evo_search.hpp>
#include <lcsc/sgd_sim.hpp>

namespace {

void BM_SearchEpoch(benchmark::State& state) {
  lcsc::SimConfig sim;
  sim.dim = 64;
  sim.iters = 4000;
  sim.checkpoint_every = 100;
  const auto set = lcsc::run_trajectory(sim, 0);
  const auto eval = lcsc::QuadraticEvaluator::centered(set.schema(), 1.0);
  lcsc::SearchConfig cfg;
  cfg.parallelism = static_cast<std::uint32_t>(state.range(0));
  lcsc::EvolutionSearch search(set, cfg, eval);
  search.initialize();
  for (auto _ : state) benchmark::DoNotOptimize(search.run_epoch());
  state.SetItemsProcessed(state.iterations() * cfg.offspring_per_epoch);
}
BENCHMARK(BM_SearchEpoch)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_TrajectoryStats(benchmark::State& state) {
  lcsc::SimConfig sim;
  sim.seeds = 10;
  const double rates[] = {0.9, 0.99, 0.999};
  for (auto _ : state) benchmark::DoNotOptimize(lcsc::trajectory_stats(sim, rates));
}
BENCHMARK(BM_TrajectoryStats)->Unit(benchmark::kMillisecond);

}  // namespace

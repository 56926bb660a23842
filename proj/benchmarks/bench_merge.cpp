// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include <lcsc/merge.hpp>

namespace {

lcsc::CheckpointSet make_set(std::size_t k, std::int64_t width) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<lcsc::Checkpoint> cps;
  for (std::size_t i = 0; i < k; ++i) {
    lcsc::TensorMap m;
    std::vector<float> w(static_cast<std::size_t>(width * width));
    for (auto& v : w) v = d(rng);
    m.insert("weight", {width, width}, std::move(w));
    cps.push_back({(i + 1) * 100, std::move(m)});
  }
  return lcsc::CheckpointSet(std::move(cps));
}

void BM_CombineDifference(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto set = make_set(k, 256);
  const auto coeffs = lcsc::make_difference(std::vector<double>(k - 1, 1.0 / static_cast<double>(k)));
  for (auto _ : state) benchmark::DoNotOptimize(lcsc::combine(set, coeffs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k) * 256 * 256);
}
BENCHMARK(BM_CombineDifference)->Arg(10)->Arg(100)->Arg(400);

void BM_EmaRecurrence(benchmark::State& state) {
  const auto set = make_set(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) benchmark::DoNotOptimize(lcsc::ema_recurrence(set, {0.999, lcsc::EmaForm::kPractice}));
}
BENCHMARK(BM_EmaRecurrence)->Arg(10)->Arg(100);

}  // namespace

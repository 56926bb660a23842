// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include <lcsc/checkpoint_store.hpp>

namespace {

lcsc::TensorMap make_map(std::int64_t tensors, std::int64_t width, lcsc::Dtype dtype) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  lcsc::TensorMap m;
  for (std::int64_t t = 0; t < tensors; ++t) {
    lcsc::Tensor tensor{dtype, {width, width}, std::vector<float>(static_cast<std::size_t>(width * width))};
    for (auto& v : tensor.data) v = u(rng);
    m.insert("layer" + std::to_string(t) + ".weight", std::move(tensor));
  }
  return m;
}

void BM_Encode(benchmark::State& state) {
  const auto m = make_map(16, 256, state.range(0) ? lcsc::Dtype::kF16 : lcsc::Dtype::kF32);
  std::int64_t bytes = 0;
  for (auto _ : state) {
    auto out = lcsc::encode_container(m);
    bytes += static_cast<std::int64_t>(out.size());
    benchmark::DoNotOptimize(out);
  }
  state.SetBytesProcessed(bytes);
}
BENCHMARK(BM_Encode)->Arg(0)->Arg(1);

void BM_Decode(benchmark::State& state) {
  const auto bytes = lcsc::encode_container(make_map(16, 256, state.range(0) ? lcsc::Dtype::kF16 : lcsc::Dtype::kF32));
  for (auto _ : state) benchmark::DoNotOptimize(lcsc::decode_container(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_Decode)->Arg(0)->Arg(1);

}  // namespace

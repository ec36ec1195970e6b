// Copyright 2026 The DistillForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "distillforge/losses.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/rng.hpp"

namespace {

using namespace distillforge;

struct Batch {
  Matrix s;
  Matrix t;
};

Batch unit_batch(std::size_t m, std::size_t d) {
  Rng rng(17, 3);
  return {normalize_rows(random_normal(m, d, 1.0, rng)), normalize_rows(random_normal(m, d, 1.0, rng))};
}

void BM_ResimEnumerated(benchmark::State& state) {
  const auto b = unit_batch(static_cast<std::size_t>(state.range(0)), 32);
  for (auto _ : state) benchmark::DoNotOptimize(resim_loss(b.s, b.t, 0.015).value);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ResimEnumerated)->RangeMultiplier(2)->Range(8, 64)->Complexity();

void BM_ResimSorted(benchmark::State& state) {
  const auto b = unit_batch(static_cast<std::size_t>(state.range(0)), 32);
  for (auto _ : state) benchmark::DoNotOptimize(resim_loss_sorted(b.s, b.t, 0.015).value);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ResimSorted)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_SimLoss(benchmark::State& state) {
  const auto b = unit_batch(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) benchmark::DoNotOptimize(sim_loss(b.s, b.t).value);
}
BENCHMARK(BM_SimLoss)->RangeMultiplier(2)->Range(16, 128);

void BM_CosineLoss(benchmark::State& state) {
  const auto b = unit_batch(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) benchmark::DoNotOptimize(cosine_loss(b.s, b.t).value);
}
BENCHMARK(BM_CosineLoss)->RangeMultiplier(2)->Range(16, 128);

}  // namespace

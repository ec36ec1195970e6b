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

#include "distillforge/model.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/pipeline.hpp"
#include "distillforge/synthetic.hpp"

namespace {

using namespace distillforge;

void BM_ForwardText(benchmark::State& state) {
  const ModelConfig cfg;
  const StudentNet net = StudentNet::init(cfg, 1);
  Rng rng(5, 1);
  const Matrix base = random_normal(static_cast<std::size_t>(state.range(0)), cfg.base_dim, 1.0, rng);
  const HeadSet heads(kAllHeads.begin(), kAllHeads.end());
  for (auto _ : state) benchmark::DoNotOptimize(forward_text(net, base, heads).tail_out.size());
}
BENCHMARK(BM_ForwardText)->Arg(16)->Arg(64);

void BM_Stage3Step(benchmark::State& state) {
  const SyntheticWorld world{SyntheticSpec{}};
  const TextDataset data = world.text_dataset(static_cast<std::size_t>(state.range(0)), 0);
  const StudentNet net = StudentNet::init(ModelConfig{}, 1);
  const StageConfig cfg = StageConfig::defaults(3);
  for (auto _ : state) benchmark::DoNotOptimize(text_stage_loss(net, data.base, data.teacher.matrix, cfg).total);
}
BENCHMARK(BM_Stage3Step)->Arg(16)->Arg(32);

void BM_Stage4Step(benchmark::State& state) {
  const SyntheticWorld world{SyntheticSpec{}};
  const VisionDataset data = world.vision_dataset(static_cast<std::size_t>(state.range(0)), 2);
  const StudentNet net = StudentNet::init(ModelConfig{}, 1);
  const StageConfig cfg = StageConfig::defaults(4);
  for (auto _ : state)
    benchmark::DoNotOptimize(stage4_loss(net, data.image_tokens, data.caption_base, cfg).total);
}
BENCHMARK(BM_Stage4Step)->Arg(16);

}  // namespace

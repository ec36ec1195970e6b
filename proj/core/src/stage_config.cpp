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

#include "distillforge/pipeline.hpp"

#include <cstdio>

#include "distillforge/errors.hpp"
#include "json.hpp"

namespace distillforge {

HeadLossPlan StageConfig::default_plan(int stage) {
  switch (stage) {
    case 1:
    case 2: return {{Head::kFc1, LossSet::all()}};
    case 3: {
      const LossSet short_heads{LossKind::kSim, LossKind::kResim};
      return {{Head::kFc1, LossSet::all()},
              {Head::kFc2, short_heads},
              {Head::kFc3, short_heads},
              {Head::kFc4, short_heads}};
    }
    case 4:
      return {{Head::kFc1, LossSet::all()},
              {Head::kFc2, LossSet::all()},
              {Head::kFc3, LossSet::all()},
              {Head::kFc4, LossSet::all()}};
    default: throw ConfigError("stage must be 1..4, got " + std::to_string(stage));
  }
}

StageConfig StageConfig::defaults(int stage, Profile profile) {
  StageConfig cfg;
  cfg.stage = stage;
  cfg.mask = stage_mask(stage);
  cfg.head_loss_plan = default_plan(stage);
  const auto i = static_cast<std::size_t>(stage - 1);
  if (profile == Profile::kPaperScale) {
    const PaperScaleProfile paper;
    cfg.batch_size = paper.batch_sizes[i];
    cfg.lr = paper.lrs[i];
    cfg.steps = paper.steps[i];
  } else {
    cfg.batch_size = 16;
    cfg.lr = 1e-3;
    cfg.steps = 1000;
  }
  return cfg;
}

void StageConfig::validate(const ModelConfig& model, std::size_t target_dim) const {
  if (stage < 1 || stage > 4) throw ConfigError("stage must be 1..4, got " + std::to_string(stage));
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0 && adamw.beta2 >= 0.0 && adamw.beta2 < 1.0))
    throw ConfigError("AdamW betas must lie in [0, 1)");
  if (!(adamw.eps > 0.0) || !(adamw.weight_decay >= 0.0))
    throw ConfigError("AdamW eps must be positive and weight decay non-negative");
  weights.validate();
  if (head_loss_plan.empty()) throw ConfigError("head_loss_plan is empty");
  if (target_mode == TargetMode::kSelfDistill && stage != 3)
    throw ConfigError("self-distillation targets are only defined for stage 3");
  for (const auto& [head, losses] : head_loss_plan) {
    if (losses.empty())
      throw ConfigError("head " + std::string(to_string(head)) + " has no active losses");
    if (!losses.has(LossKind::kCosine) || stage == 4) continue;
    const bool self_target = target_mode == TargetMode::kSelfDistill && head != Head::kFc1;
    const std::size_t want = self_target ? model.head_dim(Head::kFc1) : target_dim;
    if (model.head_dim(head) != want) {
      throw ConfigError("cosine loss is active on head " + std::string(to_string(head)) +
                        " (dim " + std::to_string(model.head_dim(head)) +
                        ") but its target has dim " + std::to_string(want));
    }
  }
}

std::string StageConfig::to_json() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["weights"] = {{"lambda1", weights.lambda1},
                  {"lambda2", weights.lambda2},
                  {"lambda3", weights.lambda3},
                  {"margin", weights.margin}};
  j["mask"] = mask.names();
  nlohmann::ordered_json plan = nlohmann::ordered_json::object();
  for (const auto& [head, losses] : head_loss_plan) {
    auto arr = nlohmann::ordered_json::array();
    for (auto k : {LossKind::kCosine, LossKind::kSim, LossKind::kResim})
      if (losses.has(k)) arr.push_back(std::string(to_string(k)));
    plan[std::string(to_string(head))] = arr;
  }
  j["head_loss_plan"] = plan;
  j["seed"] = seed;
  j["adamw"] = {{"beta1", adamw.beta1},
                {"beta2", adamw.beta2},
                {"eps", adamw.eps},
                {"weight_decay", adamw.weight_decay}};
  j["target_mode"] = target_mode == TargetMode::kSelfDistill ? "self_distill" : "teacher";
  j["cosine_reduction"] = cosine_reduction == Reduction::kMean ? "mean" : "sum";
  j["stage4_weighted"] = stage4_weighted;
  j["repeat_data"] = repeat_data;
  return j.dump();
}

std::string StageConfig::digest() const {
  // The step budget only decides when to stop, so it is not part of the
  // trajectory identity.
  StageConfig c = *this;
  c.steps = 0;
  const std::string s = c.to_json();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace distillforge

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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "distillforge/matrix.hpp"
#include "distillforge/model.hpp"

namespace distillforge {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

/// First/second moments shaped like StudentNet::params(), plus the shared
/// step counter.
struct OptimizerState {
  AdamWConfig hp;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  static OptimizerState for_net(const StudentNet& net, const AdamWConfig& hp);
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One AdamW update of a flat parameter block at step t (1-based):
///   p ← p·(1 - lr·wd)
///   m ← β1 m + (1-β1) g,  v ← β2 v + (1-β2) g²
///   p ← p - lr·√(1-β2^t)/(1-β1^t) · m / (√v + eps)
void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::uint64_t t, double lr, const AdamWConfig& hp);

/// Advances the step counter and updates every parameter whose group is in
/// `mask`. Parameters outside the mask, and their moments, are left untouched.
void adamw_step(std::vector<Parameter>& params, const ParamGrads& grads, OptimizerState& state,
                double lr, ParamGroupMask mask);

}  // namespace distillforge

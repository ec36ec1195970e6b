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

#include "distillforge/optimizer.hpp"

#include <cmath>

#include "distillforge/errors.hpp"

namespace distillforge {

OptimizerState OptimizerState::for_net(const StudentNet& net, const AdamWConfig& hp) {
  OptimizerState st;
  st.hp = hp;
  for (const auto& p : net.params()) {
    st.first_moment.emplace_back(p.value.rows(), p.value.cols());
    st.second_moment.emplace_back(p.value.rows(), p.value.cols());
  }
  return st;
}

void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::uint64_t t, double lr, const AdamWConfig& hp) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
    throw ShapeMismatch("adamw_update: buffer sizes differ");
  const double td = static_cast<double>(t);
  const double step_size =
      lr * std::sqrt(1.0 - std::pow(hp.beta2, td)) / (1.0 - std::pow(hp.beta1, td));
  const double decay = 1.0 - lr * hp.weight_decay;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
    param[i] = param[i] * decay - step_size * m[i] / (std::sqrt(v[i]) + hp.eps);
  }
}

void adamw_step(std::vector<Parameter>& params, const ParamGrads& grads, OptimizerState& state,
                double lr, ParamGroupMask mask) {
  if (grads.grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeMismatch("adamw_step: parameter, gradient and moment counts differ");
  }
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!mask.contains(p.group)) continue;
    if (!grads.grads[i].same_shape(p.value)) throw ShapeMismatch("adamw_step: gradient shape for " + p.name);
    adamw_update(p.value.data(), grads.grads[i].data(), state.first_moment[i].data(),
                 state.second_moment[i].data(), state.step, lr, state.hp);
  }
}

}  // namespace distillforge

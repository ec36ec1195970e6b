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

// Finite-difference harness for whole-network gradients, shared by the model
// tests and the acceptance suite.

#include <algorithm>
#include <map>
#include <vector>

#include "oracles.hpp"

#include "distillforge/losses.hpp"
#include "distillforge/model.hpp"
#include "distillforge/numcore.hpp"

namespace oracle {

using namespace distillforge;

inline ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.base_dim = 3;
  cfg.hidden_dim = 4;
  cfg.head_dims = {5, 4, 3, 2};
  cfg.vision_dim = 3;
  return cfg;
}

// Random weights and biases everywhere (init leaves biases at zero).
inline StudentNet random_net(const ModelConfig& cfg, Rng& rng) {
  StudentNet net = StudentNet::init(cfg, 1);
  for (auto& p : net.params())
    for (double& v : p.value.data()) v = rng.uniform(-0.8, 0.8);
  return net;
}

// Smooth scalar objective over all head outputs: a fixed linear probe plus
// the similarity loss against a fixed target.
struct Objective {
  std::map<Head, Matrix> probe;
  Matrix target;

  double value(const std::map<Head, Matrix>& outs) const {
    double v = 0.0;
    for (const auto& [h, out] : outs) {
      const Matrix& w = probe.at(h);
      for (std::size_t i = 0; i < out.size(); ++i) v += w.data()[i] * out.data()[i];
      v += sim_loss(out, target).value;
    }
    return v;
  }

  HeadGradients grads(const std::map<Head, Matrix>& outs) const {
    HeadGradients g;
    for (const auto& [h, out] : outs) {
      Matrix gh = sim_loss(out, target).grad;
      gh += probe.at(h);
      g.emplace(h, std::move(gh));
    }
    return g;
  }
};

inline Objective make_objective(const ModelConfig& cfg, std::size_t m, Rng& rng) {
  Objective o{{}, oracle::random_unit_rows(m, 6, rng)};
  for (auto h : kAllHeads) o.probe.emplace(h, random_normal(m, cfg.head_dim(h), 1.0, rng));
  return o;
}

inline std::map<Head, Matrix> outputs_of(const TextForward& f) {
  std::map<Head, Matrix> out;
  for (auto h : kAllHeads)
    if (f.heads[index_of(h)]) out.emplace(h, f.heads[index_of(h)]->out);
  return out;
}

// Max relative error between analytic and numeric gradients over every
// parameter of `net`; `eval` recomputes the objective for the current params.
template <typename Eval>
double net_fd_error(StudentNet& net, const ParamGrads& analytic, Eval eval, ParamGroupMask mask) {
  std::vector<double> a, n;
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    if (!mask.contains(net.params()[k].group)) continue;
    Matrix& value = net.params()[k].value;
    const Matrix start = value;
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> x) {
          std::copy(x.begin(), x.end(), value.data().begin());
          const double v = eval();
          value = start;
          return v;
        },
        oracle::flat(start), 1e-6);
    n.insert(n.end(), numeric.begin(), numeric.end());
    const auto g = analytic.grads[k].data();
    a.insert(a.end(), g.begin(), g.end());
  }
  return max_relative_error(a, n);
}

}  // namespace oracle

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

#include "distillforge_cli/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "distillforge/errors.hpp"
#include "distillforge/losses.hpp"
#include "distillforge/model.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/pipeline.hpp"
#include "distillforge/rng.hpp"

namespace distillforge::cli {

namespace {

constexpr double kStep = 1e-6;
constexpr double kKinkGuard = 1e-4;

std::vector<double> flat(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

Matrix with_values(const Matrix& shape, std::span<const double> x) {
  Matrix m = shape;
  std::copy(x.begin(), x.end(), m.data().begin());
  return m;
}

// Relative error of a loss gradient with respect to its student argument.
double loss_error(const Matrix& s, const std::function<double(const Matrix&)>& value, Matrix analytic,
                  bool flip) {
  const auto numeric = finite_diff_grad(
      [&](std::span<const double> x) { return value(with_values(s, x)); }, flat(s), kStep);
  if (flip) analytic *= -1.0;
  return max_relative_error(flat(analytic), numeric);
}

// Smallest |s_mn - s_ij + margin| over strictly ordered pairs of pairs.
double min_hinge_argument(const Matrix& s, const Matrix& t, double margin) {
  const auto pairs = enumerate_pairs(s.rows());
  const Matrix gs = gram(s);
  const Matrix gt = gram(t);
  double best = INFINITY;
  for (const auto& [i, j] : pairs) {
    for (const auto& [m, n] : pairs) {
      if (!(gt(i, j) > gt(m, n))) continue;
      best = std::min(best, std::abs(gs(m, n) - gs(i, j) + margin));
    }
  }
  return best;
}

ModelConfig check_model() {
  ModelConfig cfg;
  cfg.base_dim = 4;
  cfg.hidden_dim = 5;
  cfg.tail_depth = 3;
  cfg.head_dims = {6, 5, 3, 2};
  cfg.vision_dim = 3;
  return cfg;
}

StudentNet random_net(const ModelConfig& cfg, Rng& rng) {
  StudentNet net = StudentNet::init(cfg, rng.next_u64());
  for (auto& p : net.params())
    for (double& v : p.value.data()) v = rng.uniform(-0.8, 0.8);
  return net;
}

// Smooth losses only, so central differences never straddle a hinge.
StageConfig smooth_config(int stage) {
  StageConfig cfg = StageConfig::defaults(stage);
  const LossSet smooth{LossKind::kCosine, LossKind::kSim};
  cfg.head_loss_plan.clear();
  cfg.head_loss_plan[Head::kFc1] = smooth;
  for (auto h : {Head::kFc2, Head::kFc3, Head::kFc4})
    cfg.head_loss_plan[h] = stage == 4 ? smooth : LossSet{LossKind::kSim};
  return cfg;
}

double net_error(StudentNet& net, const ParamGrads& analytic, ParamGroupMask mask,
                 const std::function<double()>& objective, bool flip) {
  std::vector<double> a, n;
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    if (!mask.contains(net.params()[k].group)) continue;
    Matrix& value = net.params()[k].value;
    const Matrix start = value;
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> x) {
          std::copy(x.begin(), x.end(), value.data().begin());
          const double v = objective();
          value = start;
          return v;
        },
        flat(start), kStep);
    n.insert(n.end(), numeric.begin(), numeric.end());
    for (double g : analytic.grads[k].data()) a.push_back(flip ? -g : g);
  }
  return max_relative_error(a, n);
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts) {
  if (opts.trials == 0) throw ConfigError("--trials must be at least 1");
  const auto flip = [&](const char* name) { return opts.inject_fault && *opts.inject_fault == name; };

  GradcheckResult cosine{"cosine", 0, 0.0};
  GradcheckResult sim{"sim", 0, 0.0};
  GradcheckResult resim{"resim", 0, 0.0};
  GradcheckResult net_text{"net_text", 0, 0.0};
  GradcheckResult net_vision{"net_vision", 0, 0.0};
  const double margin = LossWeights{}.margin;

  Rng rng(opts.seed, 0x67726164);
  for (std::size_t trial = 0; trial < opts.trials; ++trial) {
    const std::size_t m = 2 + rng.uniform_int(5);
    const std::size_t d = 2 + rng.uniform_int(6);

    {
      const Matrix s = random_normal(m, d, 1.0, rng);
      const Matrix t = normalize_rows(random_normal(m, d, 1.0, rng));
      const auto reduction = trial % 2 == 0 ? Reduction::kSum : Reduction::kMean;
      const double e = loss_error(
          s, [&](const Matrix& x) { return cosine_loss(x, t, reduction).value; },
          cosine_loss(s, t, reduction).grad, flip("cosine"));
      cosine.max_rel_error = std::max(cosine.max_rel_error, e);
      ++cosine.instances;
    }
    {
      const Matrix s = random_normal(m, d, 1.0, rng);
      const Matrix t = normalize_rows(random_normal(m, d + 1, 1.0, rng));
      const double e = loss_error(
          s, [&](const Matrix& x) { return sim_loss(x, t).value; }, sim_loss(s, t).grad, flip("sim"));
      sim.max_rel_error = std::max(sim.max_rel_error, e);
      ++sim.instances;
    }
    {
      const std::size_t mr = std::max<std::size_t>(m, 4);
      Matrix s, t;
      do {
        s = normalize_rows(random_normal(mr, d, 1.0, rng));
        t = normalize_rows(random_normal(mr, d, 1.0, rng));
      } while (min_hinge_argument(s, t, margin) < kKinkGuard);
      const double e = loss_error(
          s, [&](const Matrix& x) { return resim_loss(x, t, margin).value; }, resim_loss(s, t, margin).grad,
          flip("resim"));
      resim.max_rel_error = std::max(resim.max_rel_error, e);
      ++resim.instances;
    }
    {
      const ModelConfig mc = check_model();
      StudentNet net = random_net(mc, rng);
      const Matrix base = random_normal(m + 1, mc.base_dim, 1.0, rng);
      const Matrix teacher = normalize_rows(random_normal(m + 1, mc.head_dims[0], 1.0, rng));
      StageConfig cfg = smooth_config(3);
      const auto loss = text_stage_loss(net, base, teacher, cfg);
      const double e = net_error(
          net, loss.grads, cfg.mask, [&] { return text_stage_loss(net, base, teacher, cfg).total; },
          flip("net_text"));
      net_text.max_rel_error = std::max(net_text.max_rel_error, e);
      ++net_text.instances;
    }
    {
      const ModelConfig mc = check_model();
      StudentNet net = random_net(mc, rng);
      std::vector<Matrix> tokens;
      for (std::size_t i = 0; i < m + 1; ++i) tokens.push_back(random_normal(1 + i % 3, mc.vision_dim, 1.0, rng));
      const Matrix captions = random_normal(m + 1, mc.base_dim, 1.0, rng);
      StageConfig cfg = smooth_config(4);
      const auto loss = stage4_loss(net, tokens, captions, cfg);
      const double e = net_error(
          net, loss.grads, cfg.mask, [&] { return stage4_loss(net, tokens, captions, cfg).total; },
          flip("net_vision"));
      net_vision.max_rel_error = std::max(net_vision.max_rel_error, e);
      ++net_vision.instances;
    }
  }
  return {cosine, sim, resim, net_text, net_vision};
}

}  // namespace distillforge::cli

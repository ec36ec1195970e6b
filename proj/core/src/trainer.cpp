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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "distillforge/errors.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/pipeline.hpp"
#include "json.hpp"

namespace distillforge {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool finite_report(const LossReport& r) {
  return std::isfinite(r.cosine) && std::isfinite(r.sim) && std::isfinite(r.resim) &&
         std::isfinite(r.total);
}

HeadSet plan_heads(const HeadLossPlan& plan) {
  HeadSet heads;
  for (const auto& [h, _] : plan) heads.push_back(h);
  return heads;
}

}  // namespace

std::string metrics_csv_header() {
  std::string h = "step,stage,total,active_hinges,wall_ms";
  for (auto head : kAllHeads) {
    const std::string n(to_string(head));
    h += "," + n + "_cosine," + n + "_sim," + n + "_resim," + n + "_total";
  }
  return h;
}

std::string metrics_csv_row(const StepMetrics& m) {
  std::string row = std::to_string(m.step) + "," + std::to_string(m.stage) + "," +
                    fmt_double(m.total) + "," + std::to_string(m.active_hinges) + "," +
                    fmt_double(m.wall_ms);
  for (const auto& r : m.heads) {
    if (r) {
      row += "," + fmt_double(r->cosine) + "," + fmt_double(r->sim) + "," + fmt_double(r->resim) +
             "," + fmt_double(r->total);
    } else {
      row += ",,,,";
    }
  }
  return row;
}

std::map<Head, Matrix> self_distill_targets(const StudentNet& net, const Matrix& base_features) {
  const auto fc1 = embed_text(net, base_features, {Head::kFc1}).at(Head::kFc1);
  return {{Head::kFc2, fc1}, {Head::kFc3, fc1}, {Head::kFc4, fc1}};
}

StepLoss text_stage_loss(const StudentNet& net, const Matrix& base, const Matrix& teacher,
                         const StageConfig& cfg) {
  HeadSet heads = plan_heads(cfg.head_loss_plan);
  const bool self_distill = cfg.target_mode == TargetMode::kSelfDistill;
  if (self_distill && !cfg.head_loss_plan.contains(Head::kFc1)) heads.push_back(Head::kFc1);
  const TextForward fwd = forward_text(net, base, heads);

  StepLoss out;
  HeadGradients head_grads;
  for (const auto& [head, losses] : cfg.head_loss_plan) {
    // Self-distilled short heads read FC1's outputs as plain values; no
    // gradient is routed back through them.
    const Matrix& target =
        (self_distill && head != Head::kFc1) ? fwd.out(Head::kFc1) : teacher;
    auto c = combined_loss(fwd.out(head), target, cfg.weights, losses, cfg.cosine_reduction);
    out.heads[index_of(head)] = c.report;
    out.total += c.report.total;
    out.active_hinges += c.report.active_hinges;
    head_grads.emplace(head, std::move(c.grad));
  }
  out.grads = backward_text(net, fwd, head_grads, cfg.mask);
  return out;
}

StepLoss stage4_loss(const StudentNet& net, std::span<const Matrix> image_tokens,
                     const Matrix& caption_base, const StageConfig& cfg) {
  const HeadSet heads = plan_heads(cfg.head_loss_plan);
  const VisionForward image = forward_vision(net, image_tokens, heads);
  const TextForward caption = forward_text(net, caption_base, heads);
  const double head_scale = 1.0 / static_cast<double>(heads.size());

  StepLoss out;
  HeadGradients head_grads;
  for (const auto& [head, losses] : cfg.head_loss_plan) {
    LossWeights w = cfg.weights;
    if (!cfg.stage4_weighted) {
      const double n = static_cast<double>(losses.has(LossKind::kCosine) + losses.has(LossKind::kSim) +
                                           losses.has(LossKind::kResim));
      w.lambda1 = w.lambda2 = w.lambda3 = 1.0 / n;
    }
    auto c = combined_loss(image.text.out(head), caption.out(head), w, losses, cfg.cosine_reduction);
    out.heads[index_of(head)] = c.report;
    out.total += head_scale * c.report.total;
    out.active_hinges += c.report.active_hinges;
    c.grad *= head_scale;
    head_grads.emplace(head, std::move(c.grad));
  }
  out.grads = backward_vision(net, image, head_grads, cfg.mask);
  return out;
}

// ---- runner -------------------------------------------------------------------

namespace {

std::uint64_t stage_batch_seed(const StageConfig& cfg) {
  return mix64(cfg.seed) ^ static_cast<std::uint64_t>(cfg.stage);
}

std::size_t target_dim_for(const StageConfig& cfg, const StudentNet& net, const StageData& data) {
  if (cfg.stage == 4) {
    if (data.vision == nullptr) throw ConfigError("stage 4 needs a vision dataset");
    return net.config().head_dim(Head::kFc1);
  }
  if (data.text == nullptr) throw ConfigError("stages 1-3 need a text dataset");
  return data.text->teacher.dim();
}

}  // namespace

StageRunner::StageRunner(StageConfig cfg, StudentNet net, StageData data)
    : cfg_(std::move(cfg)),
      net_(std::move(net)),
      data_(data),
      opt_(OptimizerState::for_net(net_, cfg_.adamw)),
      batches_(1, 1, 0, false) {
  cfg_.validate(net_.config(), target_dim_for(cfg_, net_, data_));
  if (cfg_.stage == 4 && data_.vision->caption_base.rows() != data_.vision->image_tokens.size())
    throw BatchMismatch("vision dataset: caption and image counts differ");
  batches_ = BatchIterator(data_size(), cfg_.batch_size, stage_batch_seed(cfg_), cfg_.repeat_data);
}

StageRunner StageRunner::resume(StageConfig cfg, const Checkpoint& ckpt, StageData data) {
  if (ckpt.stage != cfg.stage) {
    throw ConfigError("checkpoint is from stage " + std::to_string(ckpt.stage) + ", config is stage " +
                      std::to_string(cfg.stage));
  }
  if (ckpt.config_digest != cfg.digest())
    throw ConfigError("checkpoint was written under a different stage config");
  StageRunner r(std::move(cfg), ckpt.net, data);
  if (!(ckpt.optimizer.hp == r.cfg_.adamw)) throw ConfigError("checkpoint optimizer settings differ");
  r.opt_ = ckpt.optimizer;
  r.batches_ = BatchIterator(r.data_size(), r.cfg_.batch_size, ckpt.batch_seed, r.cfg_.repeat_data,
                             ckpt.cursor);
  r.steps_done_ = ckpt.step;
  r.resumed_tail_ = ckpt.metrics_tail;
  return r;
}

std::size_t StageRunner::data_size() const {
  return cfg_.stage == 4 ? data_.vision->size() : data_.text->size();
}

void StageRunner::run() {
  while (steps_done_ < cfg_.steps) step();
}

void StageRunner::run_steps(std::size_t n) {
  for (std::size_t i = 0; i < n && steps_done_ < cfg_.steps; ++i) step();
}

void StageRunner::abort_non_finite(const StepLoss& loss) {
  nlohmann::ordered_json dump;
  dump["stage"] = cfg_.stage;
  dump["step"] = steps_done_ + 1;
  dump["total"] = fmt_double(loss.total);
  for (auto h : kAllHeads) {
    const auto& r = loss.heads[index_of(h)];
    if (!r) continue;
    dump["heads"][std::string(to_string(h))] = {{"cosine", fmt_double(r->cosine)},
                                                {"sim", fmt_double(r->sim)},
                                                {"resim", fmt_double(r->resim)},
                                                {"total", fmt_double(r->total)}};
  }
  dump["config"] = nlohmann::ordered_json::parse(cfg_.to_json());
  const auto path = dump_dir_ / ("nonfinite_stage" + std::to_string(cfg_.stage) + "_step" +
                                 std::to_string(steps_done_ + 1) + ".json");
  std::ofstream(path) << dump.dump(2) << '\n';
  throw NonFiniteLoss("non-finite loss at stage " + std::to_string(cfg_.stage) + " step " +
                          std::to_string(steps_done_ + 1) + "; parameters left unchanged",
                      path.string());
}

StepMetrics StageRunner::step() {
  const auto t0 = std::chrono::steady_clock::now();
  auto batch = batches_.next();
  if (!batch) {
    throw DataExhausted("data exhausted after " + std::to_string(steps_done_) + " of " +
                        std::to_string(cfg_.steps) + " steps");
  }

  StepLoss loss;
  if (cfg_.stage == 4) {
    std::vector<Matrix> tokens;
    tokens.reserve(batch->size());
    for (auto i : *batch) tokens.push_back(data_.vision->image_tokens[i]);
    loss = stage4_loss(net_, tokens, gather_rows(data_.vision->caption_base, *batch), cfg_);
  } else {
    loss = text_stage_loss(net_, gather_rows(data_.text->base, *batch),
                           gather_rows(data_.text->teacher.matrix, *batch), cfg_);
  }

  bool finite = std::isfinite(loss.total);
  for (const auto& r : loss.heads) finite = finite && (!r || finite_report(*r));
  if (!finite) abort_non_finite(loss);

  adamw_step(net_.params(), loss.grads, opt_, cfg_.lr, cfg_.mask);
  ++steps_done_;

  StepMetrics m;
  m.step = steps_done_;
  m.stage = cfg_.stage;
  m.heads = loss.heads;
  m.total = loss.total;
  m.active_hinges = loss.active_hinges;
  if (record_wall_) {
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  metrics_.push_back(m);
  if (on_step_) on_step_(*this, m);
  return m;
}

Checkpoint StageRunner::checkpoint() const {
  Checkpoint c;
  c.stage = cfg_.stage;
  c.step = steps_done_;
  c.net = net_;
  c.optimizer = opt_;
  c.batch_seed = stage_batch_seed(cfg_);
  c.cursor = batches_.cursor();
  c.config_digest = cfg_.digest();
  c.config_json = cfg_.to_json();
  c.metrics_tail = metrics_.empty() ? resumed_tail_ : metrics_csv_row(metrics_.back());
  return c;
}

StageResult run_stage(const StageConfig& cfg, StudentNet net, StageData data) {
  StageRunner runner(cfg, std::move(net), data);
  runner.run();
  auto ckpt = runner.checkpoint();
  auto metrics = runner.metrics();
  return {std::move(runner).release_net(), std::move(metrics), std::move(ckpt)};
}

}  // namespace distillforge

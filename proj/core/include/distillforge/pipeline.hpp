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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distillforge/datakit.hpp"
#include "distillforge/losses.hpp"
#include "distillforge/model.hpp"
#include "distillforge/optimizer.hpp"
#include "distillforge/synthetic.hpp"

namespace distillforge {

enum class Profile { kDesk, kPaperScale };

enum class TargetMode {
  kTeacher,      // every head is compared with the fused teacher target
  kSelfDistill,  // FC2..FC4 take detached FC1 outputs as their target
};

using HeadLossPlan = std::map<Head, LossSet>;

struct StageConfig {
  int stage = 1;
  std::size_t steps = 0;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  LossWeights weights;
  ParamGroupMask mask;
  HeadLossPlan head_loss_plan;
  std::uint64_t seed = 0;
  AdamWConfig adamw;
  TargetMode target_mode = TargetMode::kTeacher;
  Reduction cosine_reduction = Reduction::kSum;
  /// Stage 4 only: apply λ weights instead of a plain mean of the three losses.
  bool stage4_weighted = false;
  /// Cycle epochs; when false running past the data raises DataExhausted.
  bool repeat_data = true;

  /// Defaults for a stage: mask from stage_mask, loss plan, and the
  /// per-profile batch size / learning rate / step count.
  static StageConfig defaults(int stage, Profile profile = Profile::kDesk);
  static HeadLossPlan default_plan(int stage);

  /// `target_dim` is the fused teacher width. Throws ConfigError.
  void validate(const ModelConfig& model, std::size_t target_dim) const;

  std::string to_json() const;
  /// FNV-1a 64 of to_json(), hex encoded.
  std::string digest() const;
};

/// Paper-scale dimensions and schedule, exposed for inspection.
struct PaperScaleProfile {
  std::array<std::size_t, 2> teacher_dims = {4096, 8192};
  std::size_t hidden_dim = 1536;
  std::array<std::size_t, 4> head_dims = {12288, 1536, 512, 384};
  std::array<double, 4> lrs = {1e-4, 8e-5, 7e-5, 1e-4};
  std::array<std::size_t, 4> batch_sizes = {128, 128, 128, 90};
  std::array<std::size_t, 4> steps = {4000, 7000, 2200, 3500};
};

struct StepMetrics {
  std::uint64_t step = 0;  // 1-based step index within the stage
  int stage = 0;
  std::array<std::optional<LossReport>, 4> heads;
  double total = 0.0;
  std::size_t active_hinges = 0;
  double wall_ms = 0.0;
};

/// Fixed CSV header for metrics logs.
std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);

/// Per-head loss plus the summed objective and parameter gradients.
struct StepLoss {
  std::array<std::optional<LossReport>, 4> heads;
  double total = 0.0;
  std::size_t active_hinges = 0;
  ParamGrads grads;
};

/// Detached FC1 outputs used as targets for FC2..FC4 under self-distillation.
std::map<Head, Matrix> self_distill_targets(const StudentNet& net, const Matrix& base_features);

/// Text objective for stages 1-3 on one batch.
StepLoss text_stage_loss(const StudentNet& net, const Matrix& base, const Matrix& teacher,
                         const StageConfig& cfg);

/// Vision objective: per head, S = image path, T = caption path (detached);
/// per-head mean of the three losses, then mean over heads. Gradients reach
/// the vision group only.
StepLoss stage4_loss(const StudentNet& net, std::span<const Matrix> image_tokens,
                     const Matrix& caption_base, const StageConfig& cfg);

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  int stage = 0;
  std::uint64_t step = 0;
  StudentNet net = StudentNet::zeros(ModelConfig{});
  OptimizerState optimizer;
  std::uint64_t batch_seed = 0;
  BatchCursor cursor;
  std::string config_digest;
  std::string config_json;
  /// CSV row of the last logged step (empty before the first step).
  std::string metrics_tail;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError / VersionMismatch; never returns a partial object.
Checkpoint decode_checkpoint(std::string_view bytes);
/// Writes the binary file and a JSON sidecar "<path>.json" with the config.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Training data for one stage; exactly one member is used per stage kind.
struct StageData {
  const TextDataset* text = nullptr;
  const VisionDataset* vision = nullptr;
};

/// Owns the model and optimizer state for the duration of one stage.
class StageRunner {
 public:
  StageRunner(StageConfig cfg, StudentNet net, StageData data);
  /// Continue a stage from a checkpoint taken by a runner with the same config.
  static StageRunner resume(StageConfig cfg, const Checkpoint& ckpt, StageData data);

  /// Runs until `cfg.steps` steps have been taken in total.
  void run();
  /// Runs at most `n` more steps (never past cfg.steps).
  void run_steps(std::size_t n);
  StepMetrics step();

  const StudentNet& net() const noexcept { return net_; }
  StudentNet release_net() && { return std::move(net_); }
  const OptimizerState& optimizer() const noexcept { return opt_; }
  std::uint64_t steps_done() const noexcept { return steps_done_; }
  const std::vector<StepMetrics>& metrics() const noexcept { return metrics_; }
  const StageConfig& config() const noexcept { return cfg_; }

  Checkpoint checkpoint() const;

  /// Directory for diagnostic dumps written on NonFiniteLoss.
  void set_dump_dir(std::filesystem::path dir) { dump_dir_ = std::move(dir); }
  /// Record wall-clock step time in metrics (off by default so logs are
  /// byte-reproducible).
  void set_record_wall_time(bool on) { record_wall_ = on; }
  /// Called after each step, e.g. to append CSV lines or write periodic checkpoints.
  void set_step_callback(std::function<void(const StageRunner&, const StepMetrics&)> cb) {
    on_step_ = std::move(cb);
  }

 private:
  std::size_t data_size() const;
  [[noreturn]] void abort_non_finite(const StepLoss& loss);

  StageConfig cfg_;
  StudentNet net_;
  StageData data_;
  OptimizerState opt_;
  BatchIterator batches_;
  std::uint64_t steps_done_ = 0;
  std::vector<StepMetrics> metrics_;
  std::string resumed_tail_;
  std::filesystem::path dump_dir_ = ".";
  bool record_wall_ = false;
  std::function<void(const StageRunner&, const StepMetrics&)> on_step_;
};

struct StageResult {
  StudentNet net;
  std::vector<StepMetrics> metrics;
  Checkpoint checkpoint;
};

/// Runs cfg.steps optimizer steps of one stage from `net`.
StageResult run_stage(const StageConfig& cfg, StudentNet net, StageData data);

}  // namespace distillforge

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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "distillforge/model.hpp"
#include "distillforge/pipeline.hpp"
#include "distillforge/synthetic.hpp"

namespace distillforge::cli {

/// Training data drawn from a SyntheticWorld.
struct SyntheticData {
  SyntheticSpec spec;
  std::size_t train_size = 2048;
  std::size_t vision_train_size = 2048;
};

/// Training data read from EMB1 files. Base features and teacher files are
/// keyed by text id; caption features are keyed by image id.
struct FileData {
  std::filesystem::path base;
  std::vector<std::filesystem::path> teachers;
  std::filesystem::path vision_tokens;
  std::filesystem::path caption_base;
};

/// Flag values that take precedence over the config file.
struct StageOverrides {
  std::optional<std::size_t> steps;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
};

/// Parsed run configuration. Relative paths are resolved against the
/// directory holding the config file.
struct RunConfig {
  Profile profile = Profile::kDesk;
  std::uint64_t seed = 0;
  ModelConfig model;
  std::optional<SyntheticData> synthetic;
  std::optional<FileData> files;
  std::map<int, StageConfig> stages;  // all four, defaults filled in
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path metrics_dir = "metrics";
  std::filesystem::path dump_dir = ".";
  /// Write an intermediate checkpoint every N steps (0 = only at the end).
  std::size_t checkpoint_every = 0;

  /// Stage config with flag overrides applied.
  StageConfig stage(int n, const StageOverrides& overrides = {}) const;
  /// Width of the fused teacher target.
  std::size_t target_dim() const;
};

/// Parses and validates the JSON config text. Unknown keys anywhere raise
/// ConfigError, as do malformed values.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Dataset manifest used by `eval` and written by `synth`.
struct EvalManifest {
  std::filesystem::path base;
  std::vector<std::filesystem::path> teachers;
  std::optional<std::filesystem::path> queries;
  std::optional<std::filesystem::path> docs;
  std::map<std::string, std::string> qrels;  // query id -> document id
};

EvalManifest load_eval_manifest(const std::filesystem::path& path);

}  // namespace distillforge::cli

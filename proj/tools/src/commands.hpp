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
#include <iosfwd>
#include <optional>
#include <string>

#include "distillforge_cli/run_config.hpp"
#include "log.hpp"

namespace distillforge::cli {

struct Context {
  std::ostream& out;
  std::ostream& err;
  Logger log;
};

struct PrepArgs {
  std::filesystem::path corpus;
  std::filesystem::path plan;
  std::filesystem::path out;
};

struct DistillArgs {
  std::filesystem::path config;
  int stage = 0;
  std::optional<std::filesystem::path> resume;
  StageOverrides overrides;
};

struct GradcheckArgs {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::optional<std::string> inject_fault;
};

struct EvalArgs {
  std::filesystem::path ckpt;
  std::filesystem::path data;
  bool sweep = false;
  std::optional<std::filesystem::path> out;
};

struct SynthArgs {
  std::filesystem::path out;
  std::uint64_t seed = 7;
  std::size_t train_size = 2048;
  std::size_t eval_size = 64;
  std::size_t steps = 1000;
};

struct ExportArgs {
  std::filesystem::path ckpt;
  std::filesystem::path base;
  std::string head = "fc1";
  std::filesystem::path out;
};

// Each returns a process exit code; library errors propagate to the caller.
int cmd_prep(const PrepArgs& args, Context& ctx);
int cmd_distill(const DistillArgs& args, Context& ctx);
int cmd_gradcheck(const GradcheckArgs& args, Context& ctx);
int cmd_eval(const EvalArgs& args, Context& ctx);
int cmd_synth(const SynthArgs& args, Context& ctx);
int cmd_export(const ExportArgs& args, Context& ctx);

}  // namespace distillforge::cli

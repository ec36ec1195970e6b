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

#include "distillforge_cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "distillforge/errors.hpp"
#include "log.hpp"

namespace distillforge::cli {

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-stage multi-teacher embedding distillation", "distillforge"};
  app.require_subcommand(1);

  PrepArgs prep;
  auto* prep_cmd = app.add_subcommand("prep", "Apply corpus transforms to a JSONL corpus");
  prep_cmd->add_option("--corpus", prep.corpus, "Input JSONL corpus")->required();
  prep_cmd->add_option("--plan", prep.plan, "Transform plan (JSON)")->required();
  prep_cmd->add_option("--out", prep.out, "Output JSONL path")->required();

  DistillArgs distill;
  std::string resume;
  std::size_t steps = 0, batch = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
  auto* distill_cmd = app.add_subcommand("distill", "Run one training stage");
  distill_cmd->add_option("--config", distill.config, "Run config (JSON)")->required();
  distill_cmd->add_option("--stage", distill.stage, "Stage 1-4")->required();
  auto* resume_opt = distill_cmd->add_option("--resume", resume, "Continue from a checkpoint");
  auto* steps_opt = distill_cmd->add_option("--steps", steps, "Override the stage step count");
  auto* batch_opt = distill_cmd->add_option("--batch", batch, "Override the batch size");
  auto* lr_opt = distill_cmd->add_option("--lr", lr, "Override the learning rate");
  auto* seed_opt = distill_cmd->add_option("--seed", seed, "Override the stage seed");

  GradcheckArgs gradcheck;
  std::string fault;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad_cmd->add_option("--trials", gradcheck.trials, "Random instances per component");
  grad_cmd->add_option("--seed", gradcheck.seed, "Seed");
  auto* fault_opt = grad_cmd->add_option("--inject-fault", fault, "Flip one component's gradient sign")
                        ->check(CLI::IsMember({"cosine", "sim", "resim", "net_text", "net_vision"}));
  fault_opt->group("");

  EvalArgs eval;
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Alignment and retrieval metrics for a checkpoint");
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset manifest (JSON)")->required();
  eval_cmd->add_flag("--sweep", eval.sweep, "Report every head instead of FC1 only");
  auto* eval_out_opt = eval_cmd->add_option("--out", eval_out, "Write the CSV here instead of stdout");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset, config and manifest");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "World seed");
  synth_cmd->add_option("--train", synth.train_size, "Training items");
  synth_cmd->add_option("--eval", synth.eval_size, "Evaluation items");
  synth_cmd->add_option("--steps", synth.steps, "Steps per stage in the written config");

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand("export", "Embed base features with one head");
  export_cmd->add_option("--ckpt", exp.ckpt, "Checkpoint")->required();
  export_cmd->add_option("--base", exp.base, "Base features (EMB1)")->required();
  export_cmd->add_option("--head", exp.head, "fc1|fc2|fc3|fc4");
  export_cmd->add_option("--out", exp.out, "Output EMB1 path")->required();

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return kUsage;
  }

  Context ctx{out, err, Logger(err, log_level_from_env())};
  try {
    if (*prep_cmd) return cmd_prep(prep, ctx);
    if (*distill_cmd) {
      if (*resume_opt) distill.resume = resume;
      if (*steps_opt) distill.overrides.steps = steps;
      if (*batch_opt) distill.overrides.batch_size = batch;
      if (*lr_opt) distill.overrides.lr = lr;
      if (*seed_opt) distill.overrides.seed = seed;
      return cmd_distill(distill, ctx);
    }
    if (*grad_cmd) {
      if (*fault_opt) gradcheck.inject_fault = fault;
      return cmd_gradcheck(gradcheck, ctx);
    }
    if (*eval_cmd) {
      if (*eval_out_opt) eval.out = eval_out;
      return cmd_eval(eval, ctx);
    }
    if (*synth_cmd) return cmd_synth(synth, ctx);
    if (*export_cmd) return cmd_export(exp, ctx);
  } catch (const NonFiniteLoss& e) {
    ctx.log.error(e.what());
    err << "dump: " << e.dump_path() << '\n';
    return kNumericAbort;
  } catch (const Error& e) {
    ctx.log.error(e.what());
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    ctx.log.error(e.what());
    return kUsage;
  }
  return kUsage;
}

}  // namespace distillforge::cli

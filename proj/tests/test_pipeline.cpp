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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "distillforge/errors.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/pipeline.hpp"
#include "json.hpp"

using namespace distillforge;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  SyntheticWorld world{SyntheticSpec{}};
  TextDataset text = world.text_dataset(64, 0);
  VisionDataset vision = world.vision_dataset(48, 2);
  ModelConfig model;
};

StageConfig quick(int stage, std::size_t steps) {
  auto cfg = StageConfig::defaults(stage);
  cfg.steps = steps;
  cfg.batch_size = 8;
  cfg.seed = 21;
  return cfg;
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("df_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("stage defaults") {
  const auto s1 = StageConfig::defaults(1);
  CHECK(s1.mask == stage_mask(1));
  CHECK(s1.batch_size == 16);
  CHECK(s1.lr == 1e-3);
  CHECK(s1.head_loss_plan.size() == 1);
  CHECK(s1.head_loss_plan.at(Head::kFc1) == LossSet::all());

  const auto s3 = StageConfig::defaults(3);
  CHECK(s3.head_loss_plan.at(Head::kFc1) == LossSet::all());
  for (auto h : {Head::kFc2, Head::kFc3, Head::kFc4})
    CHECK(s3.head_loss_plan.at(h) == LossSet({LossKind::kSim, LossKind::kResim}));

  const auto s4 = StageConfig::defaults(4);
  for (auto h : kAllHeads) CHECK(s4.head_loss_plan.at(h) == LossSet::all());
  CHECK_FALSE(s4.stage4_weighted);

  const PaperScaleProfile p;
  const std::array<double, 4> lrs = {1e-4, 8e-5, 7e-5, 1e-4};
  const std::array<std::size_t, 4> batches = {128, 128, 128, 90};
  const std::array<std::size_t, 4> steps = {4000, 7000, 2200, 3500};
  for (int s = 1; s <= 4; ++s) {
    const auto c = StageConfig::defaults(s, Profile::kPaperScale);
    CHECK(c.lr == lrs[s - 1]);
    CHECK(c.batch_size == batches[s - 1]);
    CHECK(c.steps == steps[s - 1]);
  }
  CHECK(p.teacher_dims[0] + p.teacher_dims[1] == p.head_dims[0]);
  CHECK_THROWS_AS(StageConfig::defaults(5), ConfigError);
}

TEST_CASE("stage config validation") {
  const ModelConfig model;
  CHECK_NOTHROW(StageConfig::defaults(3).validate(model, 40));
  auto bad = StageConfig::defaults(3);
  bad.head_loss_plan[Head::kFc3] = LossSet::all();  // 16-dim head vs 40-dim teacher
  CHECK_THROWS_AS(bad.validate(model, 40), ConfigError);
  CHECK_THROWS_AS(StageConfig::defaults(1).validate(model, 41), ConfigError);
  auto sd = StageConfig::defaults(2);
  sd.target_mode = TargetMode::kSelfDistill;
  CHECK_THROWS_AS(sd.validate(model, 40), ConfigError);
  auto zero_batch = StageConfig::defaults(1);
  zero_batch.batch_size = 0;
  CHECK_THROWS_AS(zero_batch.validate(model, 40), ConfigError);
}

TEST_CASE("config digest ignores the step budget only") {
  auto a = StageConfig::defaults(2);
  auto b = a;
  b.steps = a.steps + 100;
  CHECK(a.digest() == b.digest());
  b.lr *= 2;
  CHECK(a.digest() != b.digest());
}

TEST_CASE("zero steps returns the net unchanged") {
  Fixture f;
  const auto net = StudentNet::init(f.model, 1);
  const auto r = run_stage(quick(1, 0), net, {&f.text, nullptr});
  CHECK(r.net == net);
  CHECK(r.metrics.empty());
}

TEST_CASE("parameters outside each stage mask are bit-frozen") {
  Fixture f;
  for (int stage = 1; stage <= 4; ++stage) {
    const auto net = StudentNet::init(f.model, 3);
    const StageData data = stage == 4 ? StageData{nullptr, &f.vision} : StageData{&f.text, nullptr};
    const auto r = run_stage(quick(stage, 10), net, data);
    bool any_trained_changed = false;
    for (std::size_t k = 0; k < net.params().size(); ++k) {
      if (stage_mask(stage).contains(net.params()[k].group)) {
        any_trained_changed = any_trained_changed || !(r.net.params()[k].value == net.params()[k].value);
      } else {
        CHECK(r.net.params()[k].value == net.params()[k].value);
      }
    }
    CHECK(any_trained_changed);
  }
}

TEST_CASE("stage 3 short heads report zero cosine") {
  Fixture f;
  const auto r = run_stage(quick(3, 5), StudentNet::init(f.model, 4), {&f.text, nullptr});
  for (const auto& m : r.metrics) {
    CHECK(m.heads[index_of(Head::kFc1)]->cosine > 0.0);
    for (auto h : {Head::kFc2, Head::kFc3, Head::kFc4}) CHECK(m.heads[index_of(h)]->cosine == 0.0);
  }
}

TEST_CASE("self-distillation: FC1 targets are detached") {
  Fixture f;
  const auto net = StudentNet::init(f.model, 5);
  auto cfg = StageConfig::defaults(3);
  cfg.target_mode = TargetMode::kSelfDistill;
  cfg.head_loss_plan.erase(Head::kFc1);
  const Matrix base = slice_rows(f.text.base, 0, 8);
  const auto loss = text_stage_loss(net, base, Matrix(8, 40, 0.0), cfg);
  CHECK(max_abs(loss.grads.grads[net.head_weight(Head::kFc1)]) == 0.0);
  CHECK(max_abs(loss.grads.grads[net.head_bias(Head::kFc1)]) == 0.0);
  CHECK(max_abs(loss.grads.grads[net.head_weight(Head::kFc3)]) > 0.0);

  const auto targets = self_distill_targets(net, base);
  CHECK(targets.at(Head::kFc2) == embed_text(net, base, {Head::kFc1}).at(Head::kFc1));
  const auto fc3 = embed_text(net, base, {Head::kFc3}).at(Head::kFc3);
  CHECK(loss.heads[index_of(Head::kFc3)]->sim == sim_loss(fc3, targets.at(Head::kFc3)).value);
}

TEST_CASE("self-distillation lowers the short-head similarity loss") {
  Fixture f;
  auto cfg = StageConfig::defaults(3);
  cfg.target_mode = TargetMode::kSelfDistill;
  cfg.steps = 200;
  cfg.seed = 8;
  StageRunner runner(cfg, StudentNet::init(f.model, 6), {&f.text, nullptr});
  const Matrix eval = slice_rows(f.text.base, 0, 32);
  auto short_sim = [&](const StudentNet& net) {
    const auto t = self_distill_targets(net, eval);
    const auto o = embed_text(net, eval, {Head::kFc3});
    return sim_loss(o.at(Head::kFc3), t.at(Head::kFc3)).value;
  };
  const double before = short_sim(runner.net());
  runner.run();
  CHECK(short_sim(runner.net()) < before);
}

TEST_CASE("stage 4 loss composes component oracles and leaves captions detached") {
  Fixture f;
  auto net = StudentNet::init(f.model, 7);
  const auto cfg = StageConfig::defaults(4);
  std::vector<Matrix> tokens(f.vision.image_tokens.begin(), f.vision.image_tokens.begin() + 5);
  const Matrix captions = slice_rows(f.vision.caption_base, 0, 5);
  const auto loss = stage4_loss(net, tokens, captions, cfg);

  double expected = 0.0;
  const HeadSet all(kAllHeads.begin(), kAllHeads.end());
  const auto image = forward_vision(net, tokens, all);
  const auto caption = embed_text(net, captions, all);
  for (auto h : kAllHeads) {
    const Matrix& s = image.text.out(h);
    const Matrix& t = caption.at(h);
    const double per_head =
        (oracle::cosine(s, t) + oracle::sim(s, t) + oracle::resim(s, t, cfg.weights.margin).value) / 3.0;
    expected += per_head / 4.0;
  }
  CHECK(std::abs(loss.total - expected) <= 1e-12);
  for (std::size_t k = 0; k < net.params().size(); ++k)
    if (net.params()[k].group != ParamGroup::kVision) CHECK(max_abs(loss.grads.grads[k]) == 0.0);
  CHECK(max_abs(loss.grads.grads[net.vision_weight()]) > 0.0);
}

TEST_CASE("stage 4 with identical paths has zero cosine and sim") {
  // Identity vision projection and tokens equal to the caption features.
  ModelConfig model;
  model.vision_dim = model.base_dim;
  auto net = StudentNet::init(model, 8);
  net.params()[net.vision_weight()].value = Matrix::identity(model.base_dim);
  SyntheticWorld world{SyntheticSpec{}};
  const auto text = world.text_dataset(6, 3);
  std::vector<Matrix> tokens;
  for (std::size_t i = 0; i < 6; ++i) tokens.push_back(slice_rows(text.base, i, 1));
  const auto loss = stage4_loss(net, tokens, text.base, StageConfig::defaults(4));
  for (auto h : kAllHeads) {
    CHECK(loss.heads[index_of(h)]->cosine <= 1e-12);
    CHECK(loss.heads[index_of(h)]->sim <= 1e-24);
  }
}

TEST_CASE("checkpoint round trip is bitwise") {
  Fixture f;
  StageRunner runner(quick(2, 6), StudentNet::init(f.model, 9), {&f.text, nullptr});
  runner.run_steps(4);
  const auto ckpt = runner.checkpoint();
  const auto bytes = encode_checkpoint(ckpt);
  CHECK(decode_checkpoint(bytes) == ckpt);
  CHECK(encode_checkpoint(decode_checkpoint(bytes)) == bytes);

  const auto dir = temp_dir("roundtrip");
  save_checkpoint(dir / "a.dfck", ckpt);
  CHECK(load_checkpoint(dir / "a.dfck") == ckpt);
  CHECK(fs::exists(dir / "a.dfck.json"));
  const auto sidecar = nlohmann::json::parse(std::ifstream(dir / "a.dfck.json"));
  CHECK(sidecar.at("config_digest") == ckpt.config_digest);

  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(decode_checkpoint(std::string_view(bytes).substr(0, cut)), FormatError);
  }
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), FormatError);
  std::string bumped = bytes;
  bumped[4] = 9;  // version field follows the 4-byte magic
  CHECK_THROWS_AS(decode_checkpoint(bumped), VersionMismatch);
}

TEST_CASE("resume continues bitwise") {
  Fixture f;
  const auto cfg = quick(2, 12);
  const auto net = StudentNet::init(f.model, 10);
  const StageData data{&f.text, nullptr};

  const auto straight = run_stage(cfg, net, data);

  StageRunner first(cfg, net, data);
  first.run_steps(5);
  const auto bytes = encode_checkpoint(first.checkpoint());
  auto resumed = StageRunner::resume(cfg, decode_checkpoint(bytes), data);
  resumed.run();
  CHECK(resumed.net() == straight.net);
  CHECK(resumed.optimizer() == straight.checkpoint.optimizer);
  CHECK(resumed.checkpoint() == straight.checkpoint);
  for (std::size_t i = 0; i < resumed.metrics().size(); ++i)
    CHECK(metrics_csv_row(resumed.metrics()[i]) == metrics_csv_row(straight.metrics[5 + i]));

  auto other = cfg;
  other.lr = 5e-4;
  CHECK_THROWS_AS(StageRunner::resume(other, first.checkpoint(), data), ConfigError);
  CHECK_THROWS_AS(StageRunner::resume(quick(3, 12), first.checkpoint(), data), ConfigError);
}

TEST_CASE("two identical runs produce identical artifacts") {
  Fixture f;
  const auto cfg = quick(1, 8);
  const auto a = run_stage(cfg, StudentNet::init(f.model, 11), {&f.text, nullptr});
  const auto b = run_stage(cfg, StudentNet::init(f.model, 11), {&f.text, nullptr});
  CHECK(encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint));
  for (std::size_t i = 0; i < a.metrics.size(); ++i)
    CHECK(metrics_csv_row(a.metrics[i]) == metrics_csv_row(b.metrics[i]));
}

TEST_CASE("non-finite loss aborts before the update with a dump") {
  Fixture f;
  auto net = StudentNet::init(f.model, 12);
  net.params()[net.head_weight(Head::kFc1)].value(0, 0) = INFINITY;
  StageRunner runner(quick(1, 3), net, {&f.text, nullptr});
  const auto dir = temp_dir("nonfinite");
  runner.set_dump_dir(dir);
  try {
    runner.step();
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(fs::exists(e.dump_path()));
  }
  CHECK(runner.steps_done() == 0);
  CHECK(runner.net() == net);
  CHECK(runner.optimizer().step == 0);
}

TEST_CASE("non-repeating data runs out") {
  Fixture f;
  auto cfg = quick(1, 20);
  cfg.repeat_data = false;  // 64 items / batch 8 → 8 batches
  StageRunner runner(cfg, StudentNet::init(f.model, 13), {&f.text, nullptr});
  CHECK_THROWS_AS(runner.run(), DataExhausted);
  CHECK(runner.steps_done() == 8);
}

TEST_CASE("metrics CSV layout") {
  const auto header = metrics_csv_header();
  CHECK(header.rfind("step,stage,total,active_hinges,wall_ms,fc1_cosine", 0) == 0);
  StepMetrics m;
  m.step = 3;
  m.stage = 1;
  m.heads[0] = LossReport{0.5, 0.25, 0.125, 1.0, 2};
  const auto row = metrics_csv_row(m);
  const auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  CHECK(commas(row) == commas(header));
  CHECK(row.rfind("3,1,", 0) == 0);
}

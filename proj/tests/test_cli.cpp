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
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "distillforge/datakit.hpp"
#include "distillforge/optimizer.hpp"
#include "distillforge/pipeline.hpp"
#include "distillforge_cli/cli.hpp"
#include "json.hpp"

using namespace distillforge;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "distillforge");
  std::ostringstream out, err;
  const int code = distillforge::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("df_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Small synthetic run: 64 training texts, 20 steps per stage, batch 8.
std::string small_config(const std::string& stage3 = "{}", const std::string& extra = "") {
  return R"({
    "seed": 3,
    "data": {"synthetic": {"train_size": 64, "vision_train_size": 32}},
    "stages": {
      "1": {"steps": 20, "batch_size": 8},
      "2": {"steps": 10, "batch_size": 8},
      "3": )" + stage3 + R"(,
      "4": {"steps": 10, "batch_size": 8}
    })" + extra + "\n}";
}

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({"distill", "--help"}).code == 0);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"gradcheck", "--trials", "abc"}).code == 2);
}

TEST_CASE("gradcheck passes by default") {
  const auto r = invoke({"gradcheck"});
  CHECK(r.code == 0);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    CHECK(f[1] == "20");
    CHECK(std::stod(f[2]) < 1e-4);
    CHECK(f[3] == "ok");
  }
}

TEST_CASE("gradcheck detects a flipped cosine gradient") {
  const auto r = invoke({"gradcheck", "--trials", "3", "--inject-fault", "cosine"});
  CHECK(r.code == 1);
  CHECK(r.err.find("cosine") != std::string::npos);
  CHECK(r.out.find("cosine,3,") != std::string::npos);
  CHECK(r.out.find("sim,3,") != std::string::npos);
}

TEST_CASE("gradcheck rejects zero trials") { CHECK(invoke({"gradcheck", "--trials", "0"}).code == 2); }

TEST_CASE("prep with the identity plan preserves the corpus") {
  const auto dir = temp_dir("prep_identity");
  write_corpus_jsonl(dir / "in.jsonl", fixtures::synthetic_corpus(50, 4));
  spit(dir / "plan.json", R"({"chunk_fraction": 0, "shuffle_fraction": 0, "seed": 1})");
  const auto r = invoke({"prep", "--corpus", (dir / "in.jsonl").string(), "--plan", (dir / "plan.json").string(),
                      "--out", (dir / "out.jsonl").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "out.jsonl") == slurp(dir / "in.jsonl"));
}

TEST_CASE("prep summary matches a recount of the output") {
  const auto dir = temp_dir("prep_recount");
  Corpus corpus = fixtures::synthetic_corpus(300, 9);
  corpus.push_back({"empty1", "", RecordKind::kPassage, ""});
  corpus.push_back({"empty2", "", RecordKind::kPassage, ""});
  write_corpus_jsonl(dir / "in.jsonl", corpus);
  spit(dir / "plan.json", R"({"chunk_fraction": 0.4, "chunk_sentence_range": [1, 5], "shuffle_fraction": 0, "seed": 5})");
  const auto r = invoke({"prep", "--corpus", (dir / "in.jsonl").string(), "--plan", (dir / "plan.json").string(),
                      "--out", (dir / "out.jsonl").string()});
  REQUIRE(r.code == 0);
  const auto summary = nlohmann::json::parse(r.out);

  const Corpus out = read_corpus_jsonl(dir / "out.jsonl");
  std::set<std::string> sources;
  std::size_t chunks = 0;
  for (const auto& rec : out) {
    if (rec.source_id.empty()) continue;
    ++chunks;
    sources.insert(rec.source_id);
  }
  CHECK(summary["input_records"] == corpus.size());
  CHECK(summary["filtered_empty"] == 2);
  CHECK(summary["selected_for_chunking"] == sources.size());
  CHECK(summary["chunks_emitted"] == chunks);
  CHECK(summary["output_records"] == out.size());
  CHECK(summary["shuffled"] == 0);
  CHECK(sources.size() > 0);
  CHECK(nlohmann::json::parse(slurp(dir / "out.jsonl.summary.json")) == summary);
}

TEST_CASE("prep shuffle count matches the records that changed") {
  const auto dir = temp_dir("prep_shuffle");
  // 30 distinct tokens per record, so a shuffle never reproduces the input.
  Corpus corpus;
  for (int i = 0; i < 200; ++i) {
    std::string text;
    for (int k = 0; k < 30; ++k) text += (k ? " w" : "w") + std::to_string(k);
    corpus.push_back({"r" + std::to_string(i), text, RecordKind::kPassage, ""});
  }
  write_corpus_jsonl(dir / "in.jsonl", corpus);
  spit(dir / "plan.json", R"({"chunk_fraction": 0, "shuffle_fraction": 0.25, "seed": 2})");
  const auto r = invoke({"prep", "--corpus", (dir / "in.jsonl").string(), "--plan", (dir / "plan.json").string(),
                      "--out", (dir / "out.jsonl").string()});
  REQUIRE(r.code == 0);
  const Corpus out = read_corpus_jsonl(dir / "out.jsonl");
  REQUIRE(out.size() == corpus.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < out.size(); ++i) changed += out[i].text != corpus[i].text;
  CHECK(nlohmann::json::parse(r.out)["shuffled"] == changed);
  CHECK(changed > 0);
}

TEST_CASE("prep errors") {
  const auto dir = temp_dir("prep_errors");
  spit(dir / "plan.json", R"({"chunk_fraction": 0})");
  auto r = invoke({"prep", "--corpus", (dir / "missing.jsonl").string(), "--plan", (dir / "plan.json").string(),
                "--out", (dir / "out.jsonl").string()});
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(dir / "out.jsonl"));

  spit(dir / "bad.jsonl", "{\"id\": \"a\", \"text\": \"ok\"}\nnot json\n");
  r = invoke({"prep", "--corpus", (dir / "bad.jsonl").string(), "--plan", (dir / "plan.json").string(), "--out",
           (dir / "out.jsonl").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out.jsonl"));

  write_corpus_jsonl(dir / "in.jsonl", fixtures::synthetic_corpus(3, 1));
  spit(dir / "plan2.json", R"({"chunk_fraction": 0, "colour": 1})");
  r = invoke({"prep", "--corpus", (dir / "in.jsonl").string(), "--plan", (dir / "plan2.json").string(), "--out",
           (dir / "out.jsonl").string()});
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(dir / "out.jsonl"));
}

TEST_CASE("distill runs all four stages and writes artifacts") {
  const auto dir = temp_dir("distill_all");
  spit(dir / "run.json", small_config(R"({"steps": 10, "batch_size": 8})"));
  for (int s = 1; s <= 4; ++s) {
    const auto r = invoke({"distill", "--config", (dir / "run.json").string(), "--stage", std::to_string(s)});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(dir / "checkpoints" / ("stage" + std::to_string(s) + ".dfck")));
  }
  const auto csv = lines(slurp(dir / "metrics" / "stage1.csv"));
  REQUIRE(csv.size() == 21);
  CHECK(csv[0] == metrics_csv_header());
  CHECK(fields(csv[20])[0] == "20");

  // Stage 3 without head_loss_plan falls back to the defaults.
  const auto ckpt = load_checkpoint(dir / "checkpoints" / "stage3.dfck");
  const auto plan = nlohmann::json::parse(ckpt.config_json)["head_loss_plan"];
  CHECK(plan["fc1"] == nlohmann::json({"cosine", "sim", "resim"}));
  for (const char* h : {"fc2", "fc3", "fc4"}) CHECK(plan[h] == nlohmann::json({"sim", "resim"}));
}

TEST_CASE("distill validation errors exit 2 before writing anything") {
  const auto dir = temp_dir("distill_invalid");
  spit(dir / "run.json", small_config());
  const auto run = (dir / "run.json").string();
  CHECK(invoke({"distill", "--config", run, "--stage", "5"}).code == 2);
  CHECK(invoke({"distill", "--config", run, "--stage", "0"}).code == 2);
  CHECK(invoke({"distill", "--config", run, "--stage", "2"}).code == 2);  // no stage 1 checkpoint
  CHECK(invoke({"distill", "--config", run, "--stage", "1", "--batch", "0"}).code == 2);

  spit(dir / "unknown.json", small_config("{}", R"(, "learning_rate": 1)"));
  CHECK(invoke({"distill", "--config", (dir / "unknown.json").string(), "--stage", "1"}).code == 2);
  spit(dir / "nested.json", small_config(R"({"steps": 5, "wieghts": {}})"));
  CHECK(invoke({"distill", "--config", (dir / "nested.json").string(), "--stage", "3"}).code == 2);
  spit(dir / "cos.json", small_config(R"({"head_loss_plan": {"fc1": ["cosine"], "fc2": ["cosine"]}})"));
  const auto r = invoke({"distill", "--config", (dir / "cos.json").string(), "--stage", "3"});
  CHECK(r.code == 2);
  CHECK(r.err.find("fc2") != std::string::npos);
  spit(dir / "notjson.json", "{ \"seed\": ");
  CHECK(invoke({"distill", "--config", (dir / "notjson.json").string(), "--stage", "1"}).code == 2);
  CHECK(invoke({"distill", "--config", (dir / "absent.json").string(), "--stage", "1"}).code == 2);

  CHECK_FALSE(fs::exists(dir / "checkpoints"));
  CHECK_FALSE(fs::exists(dir / "metrics"));
}

TEST_CASE("distill resume reproduces the uninterrupted run byte for byte") {
  const auto dir = temp_dir("distill_resume");
  spit(dir / "run.json", small_config("{}", R"(, "checkpoint_every": 5)"));
  const auto run = (dir / "run.json").string();
  REQUIRE(invoke({"distill", "--config", run, "--stage", "1"}).code == 0);
  const auto full_ckpt = slurp(dir / "checkpoints" / "stage1.dfck");
  const auto full_csv = slurp(dir / "metrics" / "stage1.csv");
  CHECK(fs::exists(dir / "checkpoints" / "stage1-step10.dfck"));

  const auto r = invoke({"distill", "--config", run, "--stage", "1", "--resume",
                      (dir / "checkpoints" / "stage1-step10.dfck").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(dir / "checkpoints" / "stage1.dfck") == full_ckpt);
  CHECK(slurp(dir / "metrics" / "stage1.csv") == full_csv);

  // Without the CSV the log restarts from the checkpoint's last row.
  fs::remove(dir / "metrics" / "stage1.csv");
  REQUIRE(invoke({"distill", "--config", run, "--stage", "1", "--resume",
               (dir / "checkpoints" / "stage1-step10.dfck").string()})
              .code == 0);
  const auto csv = lines(slurp(dir / "metrics" / "stage1.csv"));
  REQUIRE(csv.size() == 12);
  CHECK(fields(csv[1])[0] == "10");
  CHECK(slurp(dir / "checkpoints" / "stage1.dfck") == full_ckpt);

  // A resume under a different stage config is refused.
  CHECK(invoke({"distill", "--config", run, "--stage", "1", "--lr", "0.5", "--resume",
             (dir / "checkpoints" / "stage1-step10.dfck").string()})
            .code == 2);
}

TEST_CASE("distill reruns are deterministic") {
  const auto a = temp_dir("distill_det_a");
  const auto b = temp_dir("distill_det_b");
  for (const auto& dir : {a, b}) {
    spit(dir / "run.json", small_config());
    REQUIRE(invoke({"distill", "--config", (dir / "run.json").string(), "--stage", "1"}).code == 0);
  }
  CHECK(slurp(a / "checkpoints" / "stage1.dfck") == slurp(b / "checkpoints" / "stage1.dfck"));
  CHECK(slurp(a / "metrics" / "stage1.csv") == slurp(b / "metrics" / "stage1.csv"));
}

TEST_CASE("distill flag overrides") {
  const auto dir = temp_dir("distill_flags");
  spit(dir / "run.json", small_config());
  const auto r = invoke({"distill", "--config", (dir / "run.json").string(), "--stage", "1", "--steps", "4",
                      "--batch", "4", "--lr", "0.002", "--seed", "99"});
  REQUIRE(r.code == 0);
  const auto ckpt = load_checkpoint(dir / "checkpoints" / "stage1.dfck");
  CHECK(ckpt.step == 4);
  const auto cfg = nlohmann::json::parse(ckpt.config_json);
  CHECK(cfg["batch_size"] == 4);
  CHECK(cfg["lr"] == 0.002);
  CHECK(lines(slurp(dir / "metrics" / "stage1.csv")).size() == 5);
}

TEST_CASE("distill numeric abort exits 3 with a dump") {
  const auto dir = temp_dir("distill_nan");
  spit(dir / "run.json", small_config("{}", R"(, "paths": {"dump_dir": "dumps"})"));
  const auto r = invoke({"distill", "--config", (dir / "run.json").string(), "--stage", "1", "--lr", "1e300"});
  CHECK(r.code == 3);
  const auto pos = r.err.find("dump: ");
  REQUIRE(pos != std::string::npos);
  const auto path = r.err.substr(pos + 6, r.err.find('\n', pos) - pos - 6);
  CHECK(fs::exists(path));
  CHECK(fs::path(path).parent_path() == dir / "dumps");
}

TEST_CASE("distill without repeat_data runs out of data") {
  const auto dir = temp_dir("distill_exhausted");
  spit(dir / "run.json", small_config(R"({"steps": 5})").replace(
                             small_config(R"({"steps": 5})").find(R"("1": {"steps": 20, "batch_size": 8})"),
                             std::string(R"("1": {"steps": 20, "batch_size": 8})").size(),
                             R"("1": {"steps": 20, "batch_size": 8, "repeat_data": false})"));
  const auto r = invoke({"distill", "--config", (dir / "run.json").string(), "--stage", "1"});
  CHECK(r.code == 2);
}

TEST_CASE("eval on the identity-teacher fixture") {
  const auto dir = temp_dir("eval_identity");
  ModelConfig mc;
  mc.base_dim = 4;
  mc.hidden_dim = 4;
  mc.head_dims = {4, 3, 2, 2};
  mc.vision_dim = 3;
  mc.activation = Activation::kIdentity;
  StudentNet net = StudentNet::zeros(mc);
  for (std::size_t l = 0; l < mc.tail_depth; ++l) {
    net.params()[net.tail_weight(l)].value = Matrix(4, 4);
    for (std::size_t i = 0; i < 4; ++i) net.params()[net.tail_weight(l)].value(i, i) = 1.0;
  }
  for (std::size_t i = 0; i < 4; ++i) net.params()[net.head_weight(Head::kFc1)].value(i, i) = 1.0;
  Rng rng(11, 0);
  for (auto h : {Head::kFc2, Head::kFc3, Head::kFc4})
    for (double& v : net.params()[net.head_weight(h)].value.data()) v = rng.uniform(-1.0, 1.0);
  Checkpoint ckpt;
  ckpt.stage = 3;
  ckpt.net = net;
  ckpt.optimizer = OptimizerState::for_net(net, AdamWConfig{});
  save_checkpoint(dir / "id.dfck", ckpt);

  EmbeddingSet base;
  base.values = Matrix(12, 4);
  for (int i = 0; i < 12; ++i) {
    base.ids.push_back("t" + std::to_string(i));
    for (int c = 0; c < 4; ++c) base.values(i, c) = rng.uniform(-1.0, 1.0);
  }
  write_embedding_file(dir / "base.emb", base);
  write_embedding_file(dir / "teacher.emb", base);
  spit(dir / "manifest.json", R"({"base": "base.emb", "teachers": ["teacher.emb"]})");

  const auto ckpt_path = (dir / "id.dfck").string();
  const auto data = (dir / "manifest.json").string();
  const auto r = invoke({"eval", "--ckpt", ckpt_path, "--data", data});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "head,dim,mean_cosine,sim_mse,spearman,recall_at_1,recall_at_5,recall_at_10,mrr");
  const auto f = fields(rows[1]);
  REQUIRE(f.size() == 9);
  CHECK(f[0] == "fc1");
  CHECK(std::abs(std::stod(f[2]) - 1.0) < 1e-12);
  CHECK(std::abs(std::stod(f[3])) < 1e-12);

  const auto sweep = invoke({"eval", "--ckpt", ckpt_path, "--data", data, "--sweep"});
  const auto sweep_rows = lines(sweep.out);
  REQUIRE(sweep_rows.size() == 5);
  for (const auto& row : sweep_rows) CHECK(fields(row).size() == 9);
  CHECK(fields(sweep_rows[2])[2].empty());  // fc2 width differs from the teacher

  CHECK(invoke({"eval", "--ckpt", ckpt_path, "--data", data, "--sweep"}).out == sweep.out);
  REQUIRE(invoke({"eval", "--ckpt", ckpt_path, "--data", data, "--sweep", "--out", (dir / "s.csv").string()}).code == 0);
  CHECK(slurp(dir / "s.csv") == sweep.out);

  CHECK(invoke({"eval", "--ckpt", (dir / "missing.dfck").string(), "--data", data}).code == 2);
}

TEST_CASE("synth, file-backed distill, eval and export") {
  const auto dir = temp_dir("synth");
  REQUIRE(invoke({"synth", "--out", dir.string(), "--train", "96", "--eval", "32", "--steps", "6"}).code == 0);
  const auto config = (dir / "config.json").string();
  for (int s = 1; s <= 4; ++s) {
    const auto r = invoke({"distill", "--config", config, "--stage", std::to_string(s)});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  const auto ckpt = (dir / "checkpoints" / "stage4.dfck").string();
  const auto r = invoke({"eval", "--ckpt", ckpt, "--data", (dir / "manifest.json").string(), "--sweep"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    REQUIRE(f.size() == 9);
    const double r1 = std::stod(f[5]), r10 = std::stod(f[7]), mrr = std::stod(f[8]);
    CHECK(r1 >= 0.0);
    CHECK(r1 <= r10);
    CHECK(r10 <= 1.0);
    CHECK(mrr >= r1);
  }

  REQUIRE(invoke({"export", "--ckpt", ckpt, "--base", (dir / "eval_base.emb").string(), "--head", "fc3", "--out",
               (dir / "fc3.emb").string()})
              .code == 0);
  const auto exported = read_embedding_file(dir / "fc3.emb");
  CHECK(exported.dim() == 16);
  CHECK(exported.ids == read_embedding_file(dir / "eval_base.emb").ids);
  for (std::size_t i = 0; i < exported.values.rows(); ++i) {
    double n = 0.0;
    for (std::size_t c = 0; c < exported.dim(); ++c) n += exported.values(i, c) * exported.values(i, c);
    CHECK(std::abs(n - 1.0) < 1e-5);
  }
  CHECK(invoke({"export", "--ckpt", ckpt, "--base", (dir / "eval_base.emb").string(), "--head", "fc9", "--out",
             (dir / "x.emb").string()})
            .code == 2);
}

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

#include "commands.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "distillforge/datakit.hpp"
#include "distillforge/errors.hpp"
#include "distillforge/evalkit.hpp"
#include "distillforge/pipeline.hpp"
#include "distillforge/synthetic.hpp"
#include "distillforge/teachers.hpp"
#include "distillforge_cli/cli.hpp"
#include "distillforge_cli/gradcheck.hpp"
#include "json.hpp"

namespace distillforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Partitions of the synthetic latent stream.
constexpr std::uint64_t kTrainText = 0;
constexpr std::uint64_t kEvalText = 1;
constexpr std::uint64_t kTrainVision = 2;
constexpr std::uint64_t kRetrieval = 4;

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

TransformPlan parse_plan(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("plan is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("plan must be a JSON object");
  TransformPlan plan;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "chunk_fraction") {
        plan.chunk_fraction = v.get<double>();
      } else if (key == "shuffle_fraction") {
        plan.shuffle_fraction = v.get<double>();
      } else if (key == "seed") {
        plan.seed = v.get<std::uint64_t>();
      } else if (key == "chunk_sentence_range") {
        if (!v.is_array() || v.size() != 2) throw ConfigError("chunk_sentence_range must be [min, max]");
        plan.chunk_min_sentences = v[0].get<std::size_t>();
        plan.chunk_max_sentences = v[1].get<std::size_t>();
      } else {
        throw ConfigError("unknown key '" + key + "' in plan");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad plan value: " + std::string(e.what()));
  }
  plan.validate();
  return plan;
}

TextDataset text_from_files(const fs::path& base_path, const std::vector<fs::path>& teachers) {
  EmbeddingSet base = read_embedding_file(base_path);
  if (teachers.empty()) throw ConfigError("no teacher files given");
  TextDataset ds;
  for (const auto& t : teachers) ds.teacher_outputs.push_back(load_teacher_embeddings(t, base.ids));
  ds.teacher = fuse(ds.teacher_outputs);
  ds.ids = std::move(base.ids);
  ds.base = std::move(base.values);
  return ds;
}

VisionDataset vision_from_files(const FileData& files) {
  if (files.vision_tokens.empty() || files.caption_base.empty())
    throw ConfigError("stage 4 needs data.files.vision_tokens and data.files.caption_base");
  auto tokens = group_vision_tokens(read_embedding_file(files.vision_tokens));
  EmbeddingSet captions = read_embedding_file(files.caption_base);
  VisionDataset ds;
  for (const auto& id : captions.ids) {
    const auto it = tokens.find(id);
    if (it == tokens.end()) throw MissingKey(id);
    ds.image_tokens.push_back(it->second);
  }
  ds.ids = std::move(captions.ids);
  ds.caption_base = std::move(captions.values);
  return ds;
}

struct LoadedData {
  std::optional<TextDataset> text;
  std::optional<VisionDataset> vision;

  StageData view() const { return {text ? &*text : nullptr, vision ? &*vision : nullptr}; }
};

LoadedData load_stage_data(const RunConfig& rc, int stage) {
  LoadedData d;
  if (rc.synthetic) {
    const SyntheticWorld world(rc.synthetic->spec);
    if (stage == 4) {
      d.vision = world.vision_dataset(rc.synthetic->vision_train_size, kTrainVision);
    } else {
      d.text = world.text_dataset(rc.synthetic->train_size, kTrainText);
    }
  } else if (stage == 4) {
    d.vision = vision_from_files(*rc.files);
  } else {
    d.text = text_from_files(rc.files->base, rc.files->teachers);
  }
  return d;
}

fs::path stage_checkpoint(const RunConfig& rc, int stage) {
  return rc.checkpoint_dir / ("stage" + std::to_string(stage) + ".dfck");
}

// Keeps the header and every row up to `step`; falls back to `tail` when
// the log is missing.
std::string resumed_csv(const fs::path& path, std::uint64_t step, const std::string& tail) {
  std::string kept = metrics_csv_header() + "\n";
  std::ifstream in(path);
  if (!in) return tail.empty() ? kept : kept + tail + "\n";
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) > step) break;
    kept += line + "\n";
  }
  return kept;
}

void write_embeddings(const fs::path& path, std::vector<std::string> ids, Matrix values) {
  EmbeddingSet set{std::move(ids), std::move(values)};
  write_embedding_file(path, set);
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

}  // namespace

int cmd_prep(const PrepArgs& args, Context& ctx) {
  const TransformPlan plan = parse_plan(args.plan);
  const Corpus corpus = read_corpus_jsonl(args.corpus);
  const TransformResult result = apply_transforms(corpus, plan);
  if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
  write_corpus_jsonl(args.out, result.corpus);

  const auto& s = result.summary;
  ordered_json summary = {{"input_records", s.input_records},
                          {"filtered_empty", s.filtered_empty},
                          {"selected_for_chunking", s.selected_for_chunking},
                          {"chunks_emitted", s.chunks_emitted},
                          {"shuffled", s.shuffled},
                          {"output_records", s.output_records}};
  write_file(fs::path(args.out.string() + ".summary.json"), summary.dump(2) + "\n");
  ctx.out << summary.dump() << '\n';
  return kOk;
}

int cmd_distill(const DistillArgs& args, Context& ctx) {
  // Everything that can be rejected is checked before touching the disk.
  const RunConfig rc = load_run_config(args.config);
  const StageConfig cfg = rc.stage(args.stage, args.overrides);
  cfg.validate(rc.model, rc.target_dim());

  std::optional<Checkpoint> resume;
  StudentNet start = StudentNet::zeros(rc.model);
  if (args.resume) {
    resume = load_checkpoint(*args.resume);
  } else if (args.stage == 1) {
    start = StudentNet::init(rc.model, rc.seed);
  } else {
    const fs::path prev = stage_checkpoint(rc, args.stage - 1);
    if (!fs::exists(prev)) throw ConfigError("stage " + std::to_string(args.stage) + " needs " + prev.string());
    start = load_checkpoint(prev).net;
  }
  if (!resume && !(start.config() == rc.model))
    throw ConfigError("previous stage checkpoint has a different model shape");

  const LoadedData data = load_stage_data(rc, args.stage);
  StageRunner runner = resume ? StageRunner::resume(cfg, *resume, data.view())
                              : StageRunner(cfg, std::move(start), data.view());

  fs::create_directories(rc.checkpoint_dir);
  fs::create_directories(rc.metrics_dir);
  fs::create_directories(rc.dump_dir);
  runner.set_dump_dir(rc.dump_dir);

  const fs::path csv_path = rc.metrics_dir / ("stage" + std::to_string(args.stage) + ".csv");
  const std::string csv_start = resume ? resumed_csv(csv_path, resume->step, resume->metrics_tail)
                                       : metrics_csv_header() + "\n";
  write_file(csv_path, csv_start);
  std::ofstream csv(csv_path, std::ios::app);

  const std::size_t log_every = std::max<std::size_t>(1, cfg.steps / 10);
  runner.set_step_callback([&](const StageRunner& r, const StepMetrics& m) {
    csv << metrics_csv_row(m) << '\n';
    if (m.step % log_every == 0 || m.step == cfg.steps) {
      csv.flush();
      ctx.log.info("stage " + std::to_string(cfg.stage) + " step " + std::to_string(m.step) + "/" +
                   std::to_string(cfg.steps) + " loss " + fmt(m.total));
    } else {
      ctx.log.debug("step " + std::to_string(m.step) + " loss " + fmt(m.total) + " hinges " +
                    std::to_string(m.active_hinges));
    }
    if (rc.checkpoint_every > 0 && m.step % rc.checkpoint_every == 0 && m.step < cfg.steps) {
      csv.flush();
      save_checkpoint(rc.checkpoint_dir / ("stage" + std::to_string(cfg.stage) + "-step" +
                                           std::to_string(m.step) + ".dfck"),
                      r.checkpoint());
    }
  });

  runner.run();
  csv.close();
  const fs::path out = stage_checkpoint(rc, args.stage);
  save_checkpoint(out, runner.checkpoint());
  ctx.out << out.string() << '\n';
  return kOk;
}

int cmd_gradcheck(const GradcheckArgs& args, Context& ctx) {
  const auto results = run_gradcheck({args.trials, args.seed, args.inject_fault});
  constexpr double kTolerance = 1e-4;
  std::vector<std::string> failed;
  ctx.out << "component,instances,max_rel_error,status\n";
  for (const auto& r : results) {
    const bool ok = r.max_rel_error < kTolerance;
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << r.max_rel_error;
    ctx.out << r.component << ',' << r.instances << ',' << err.str() << ',' << (ok ? "ok" : "FAIL") << '\n';
    if (!ok) failed.push_back(r.component);
  }
  if (failed.empty()) return kOk;
  std::string names;
  for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
  ctx.log.error("gradient check failed: " + names);
  return kCheckFailed;
}

int cmd_eval(const EvalArgs& args, Context& ctx) {
  const EvalManifest manifest = load_eval_manifest(args.data);
  const Checkpoint ckpt = load_checkpoint(args.ckpt);
  const TextDataset ds = text_from_files(manifest.base, manifest.teachers);

  std::optional<RetrievalSet> retrieval;
  if (manifest.queries) {
    EmbeddingSet queries = read_embedding_file(*manifest.queries);
    EmbeddingSet docs = read_embedding_file(*manifest.docs);
    std::map<std::string, std::size_t> doc_index;
    for (std::size_t i = 0; i < docs.ids.size(); ++i) doc_index.emplace(docs.ids[i], i);
    RetrievalSet rs{std::move(queries.values), std::move(docs.values), {}};
    for (const auto& q : queries.ids) {
      const auto rel = manifest.qrels.find(q);
      if (rel == manifest.qrels.end()) throw MissingQrel("query " + q + " has no relevant document");
      const auto d = doc_index.find(rel->second);
      if (d == doc_index.end()) throw MissingQrel("query " + q + " names unknown document " + rel->second);
      rs.qrels.push_back(d->second);
    }
    retrieval = std::move(rs);
  }

  auto rows = dimension_sweep(ckpt.net, ds.base, ds.teacher.matrix, retrieval ? &*retrieval : nullptr);
  if (!args.sweep) rows.resize(1);
  std::string csv = sweep_csv_header() + "\n";
  for (const auto& r : rows) csv += sweep_csv_row(r) + "\n";
  if (args.out) {
    write_file(*args.out, csv);
  } else {
    ctx.out << csv;
  }
  return kOk;
}

int cmd_synth(const SynthArgs& args, Context& ctx) {
  if (args.train_size == 0 || args.eval_size < 2) throw ConfigError("synth needs --train >= 1 and --eval >= 2");
  SyntheticSpec spec;
  spec.seed = args.seed;
  const SyntheticWorld world(spec);
  const fs::path& dir = args.out;
  fs::create_directories(dir);

  const auto write_text = [&](const std::string& prefix, std::size_t n, std::uint64_t partition) {
    const TextDataset ds = world.text_dataset(n, partition);
    write_embeddings(dir / (prefix + "_base.emb"), ds.ids, ds.base);
    json teachers = json::array();
    for (std::size_t k = 0; k < ds.teacher_outputs.size(); ++k) {
      const std::string name = prefix + "_teacher" + std::to_string(k) + ".emb";
      write_embeddings(dir / name, ds.ids, ds.teacher_outputs[k]);
      teachers.push_back(name);
    }
    return teachers;
  };
  const json train_teachers = write_text("train", args.train_size, kTrainText);
  const json eval_teachers = write_text("eval", args.eval_size, kEvalText);

  const VisionDataset vision = world.vision_dataset(args.train_size, kTrainVision);
  EmbeddingSet tokens;
  std::size_t token_rows = 0;
  for (const auto& t : vision.image_tokens) token_rows += t.rows();
  tokens.values = Matrix(token_rows, spec.vision_dim);
  std::size_t row = 0;
  for (std::size_t i = 0; i < vision.size(); ++i) {
    const Matrix& t = vision.image_tokens[i];
    for (std::size_t k = 0; k < t.rows(); ++k, ++row) {
      tokens.ids.push_back(vision.ids[i] + "#token-" + std::to_string(k));
      for (std::size_t c = 0; c < t.cols(); ++c) tokens.values(row, c) = t(k, c);
    }
  }
  write_embedding_file(dir / "vision_tokens.emb", tokens);
  write_embeddings(dir / "caption_base.emb", vision.ids, vision.caption_base);

  const RetrievalSet rs = world.retrieval_set(args.eval_size, kRetrieval);
  const auto query_ids = numbered("q", rs.query_base.rows());
  const auto doc_ids = numbered("d", rs.doc_base.rows());
  write_embeddings(dir / "queries.emb", query_ids, rs.query_base);
  write_embeddings(dir / "docs.emb", doc_ids, rs.doc_base);
  ordered_json qrels = ordered_json::object();
  for (std::size_t i = 0; i < rs.qrels.size(); ++i) qrels[query_ids[i]] = doc_ids[rs.qrels[i]];

  ordered_json manifest = {{"base", "eval_base.emb"},
                           {"teachers", eval_teachers},
                           {"retrieval", {{"queries", "queries.emb"}, {"docs", "docs.emb"}, {"qrels", qrels}}}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  ordered_json stages = ordered_json::object();
  for (int s = 1; s <= 4; ++s) stages[std::to_string(s)] = {{"steps", args.steps}};
  ordered_json config = {{"profile", "desk"},
                         {"seed", 1},
                         {"data",
                          {{"files",
                            {{"base", "train_base.emb"},
                             {"teachers", train_teachers},
                             {"vision_tokens", "vision_tokens.emb"},
                             {"caption_base", "caption_base.emb"}}}}},
                         {"stages", stages},
                         {"paths", {{"checkpoint_dir", "checkpoints"}, {"metrics_dir", "metrics"}}}};
  write_file(dir / "config.json", config.dump(2) + "\n");
  ctx.out << (dir / "config.json").string() << '\n' << (dir / "manifest.json").string() << '\n';
  return kOk;
}

int cmd_export(const ExportArgs& args, Context& ctx) {
  const Head head = parse_head(args.head);
  const Checkpoint ckpt = load_checkpoint(args.ckpt);
  EmbeddingSet base = read_embedding_file(args.base);
  auto outs = embed_text(ckpt.net, base.values, {head});
  write_embeddings(args.out, std::move(base.ids), std::move(outs.at(head)));
  ctx.out << args.out.string() << '\n';
  return kOk;
}

}  // namespace distillforge::cli

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

#include "distillforge_cli/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "distillforge/datakit.hpp"
#include "distillforge/errors.hpp"
#include "json.hpp"

namespace distillforge::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

std::size_t get_count(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

double get_real(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  return v.get<double>();
}

std::string get_string(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
  return v.get<bool>();
}

std::filesystem::path get_path(const json& j, const char* key, const std::string& where,
                               const std::filesystem::path& base_dir) {
  std::filesystem::path p = get_string(j, key, where);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::size_t> get_counts(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + " must be an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_unsigned()) throw ConfigError(where + "." + key + " entries must be non-negative integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

Profile parse_profile(const std::string& s) {
  if (s == "desk") return Profile::kDesk;
  if (s == "paper-scale") return Profile::kPaperScale;
  throw ConfigError("profile must be 'desk' or 'paper-scale', got '" + s + "'");
}

ModelConfig default_model(Profile profile) {
  ModelConfig m;
  if (profile == Profile::kPaperScale) {
    const PaperScaleProfile paper;
    m.base_dim = paper.hidden_dim;
    m.hidden_dim = paper.hidden_dim;
    m.head_dims = paper.head_dims;
    m.vision_dim = paper.hidden_dim;
  }
  return m;
}

void parse_model(const json& j, ModelConfig& m) {
  const std::string w = "model";
  check_keys(j, {"base_dim", "hidden_dim", "tail_depth", "head_dims", "vision_dim", "activation"}, w);
  if (j.contains("base_dim")) m.base_dim = get_count(j, "base_dim", w);
  if (j.contains("hidden_dim")) m.hidden_dim = get_count(j, "hidden_dim", w);
  if (j.contains("tail_depth")) m.tail_depth = get_count(j, "tail_depth", w);
  if (j.contains("vision_dim")) m.vision_dim = get_count(j, "vision_dim", w);
  if (j.contains("head_dims")) {
    const auto dims = get_counts(j, "head_dims", w);
    if (dims.size() != 4) throw ConfigError("model.head_dims needs exactly 4 entries");
    std::copy(dims.begin(), dims.end(), m.head_dims.begin());
  }
  if (j.contains("activation")) {
    const auto a = get_string(j, "activation", w);
    if (a == "tanh") {
      m.activation = Activation::kTanh;
    } else if (a == "identity") {
      m.activation = Activation::kIdentity;
    } else {
      throw ConfigError("model.activation must be 'tanh' or 'identity'");
    }
  }
  m.validate();
}

SyntheticData parse_synthetic(const json& j, Profile profile, const ModelConfig& model) {
  const std::string w = "data.synthetic";
  check_keys(j, {"latent_dim", "teacher_dims", "tokens_per_image", "token_noise", "query_noise", "seed",
                 "train_size", "vision_train_size"},
             w);
  SyntheticData d;
  if (profile == Profile::kPaperScale) {
    const PaperScaleProfile paper;
    d.spec.teacher_dims.assign(paper.teacher_dims.begin(), paper.teacher_dims.end());
  }
  d.spec.base_dim = model.base_dim;
  d.spec.vision_dim = model.vision_dim;
  if (j.contains("latent_dim")) d.spec.latent_dim = get_count(j, "latent_dim", w);
  if (j.contains("teacher_dims")) d.spec.teacher_dims = get_counts(j, "teacher_dims", w);
  if (j.contains("tokens_per_image")) d.spec.tokens_per_image = get_count(j, "tokens_per_image", w);
  if (j.contains("token_noise")) d.spec.token_noise = get_real(j, "token_noise", w);
  if (j.contains("query_noise")) d.spec.query_noise = get_real(j, "query_noise", w);
  if (j.contains("seed")) d.spec.seed = get_count(j, "seed", w);
  if (j.contains("train_size")) d.train_size = get_count(j, "train_size", w);
  if (j.contains("vision_train_size")) d.vision_train_size = get_count(j, "vision_train_size", w);
  if (d.spec.latent_dim == 0 || d.spec.tokens_per_image == 0)
    throw ConfigError("data.synthetic dimensions must be >= 1");
  if (d.spec.teacher_dims.empty()) throw ConfigError("data.synthetic.teacher_dims is empty");
  for (auto t : d.spec.teacher_dims)
    if (t == 0) throw ConfigError("data.synthetic.teacher_dims entries must be >= 1");
  return d;
}

FileData parse_files(const json& j, const std::filesystem::path& base_dir) {
  const std::string w = "data.files";
  check_keys(j, {"base", "teachers", "vision_tokens", "caption_base"}, w);
  FileData f;
  if (j.contains("base")) f.base = get_path(j, "base", w, base_dir);
  if (j.contains("teachers")) {
    if (!j.at("teachers").is_array()) throw ConfigError("data.files.teachers must be an array");
    for (const auto& t : j.at("teachers")) {
      if (!t.is_string()) throw ConfigError("data.files.teachers entries must be strings");
      std::filesystem::path p = t.get<std::string>();
      f.teachers.push_back(p.is_absolute() ? p : base_dir / p);
    }
  }
  if (j.contains("vision_tokens")) f.vision_tokens = get_path(j, "vision_tokens", w, base_dir);
  if (j.contains("caption_base")) f.caption_base = get_path(j, "caption_base", w, base_dir);
  return f;
}

void parse_stage(const json& j, StageConfig& cfg) {
  const std::string w = "stages." + std::to_string(cfg.stage);
  check_keys(j, {"steps", "batch_size", "lr", "seed", "weights", "head_loss_plan", "target_mode",
                 "cosine_reduction", "stage4_weighted", "repeat_data", "adamw"},
             w);
  if (j.contains("steps")) cfg.steps = get_count(j, "steps", w);
  if (j.contains("batch_size")) cfg.batch_size = get_count(j, "batch_size", w);
  if (j.contains("lr")) cfg.lr = get_real(j, "lr", w);
  if (j.contains("seed")) cfg.seed = get_count(j, "seed", w);
  if (j.contains("weights")) {
    const auto& wj = j.at("weights");
    const std::string ww = w + ".weights";
    check_keys(wj, {"lambda1", "lambda2", "lambda3", "margin"}, ww);
    if (wj.contains("lambda1")) cfg.weights.lambda1 = get_real(wj, "lambda1", ww);
    if (wj.contains("lambda2")) cfg.weights.lambda2 = get_real(wj, "lambda2", ww);
    if (wj.contains("lambda3")) cfg.weights.lambda3 = get_real(wj, "lambda3", ww);
    if (wj.contains("margin")) cfg.weights.margin = get_real(wj, "margin", ww);
  }
  if (j.contains("head_loss_plan")) {
    const auto& pj = j.at("head_loss_plan");
    if (!pj.is_object()) throw ConfigError(w + ".head_loss_plan must be an object");
    HeadLossPlan plan;
    for (const auto& [head, losses] : pj.items()) {
      if (!losses.is_array()) throw ConfigError(w + ".head_loss_plan." + head + " must be an array");
      LossSet set;
      for (const auto& l : losses) {
        if (!l.is_string()) throw ConfigError(w + ".head_loss_plan." + head + " entries must be strings");
        set = LossSet::from_bits(
            static_cast<std::uint8_t>(set.bits() | static_cast<std::uint8_t>(parse_loss_kind(l.get<std::string>()))));
      }
      plan[parse_head(head)] = set;
    }
    cfg.head_loss_plan = plan;
  }
  if (j.contains("target_mode")) {
    const auto m = get_string(j, "target_mode", w);
    if (m == "teacher") {
      cfg.target_mode = TargetMode::kTeacher;
    } else if (m == "self_distill") {
      cfg.target_mode = TargetMode::kSelfDistill;
    } else {
      throw ConfigError(w + ".target_mode must be 'teacher' or 'self_distill'");
    }
  }
  if (j.contains("cosine_reduction")) {
    const auto r = get_string(j, "cosine_reduction", w);
    if (r == "sum") {
      cfg.cosine_reduction = Reduction::kSum;
    } else if (r == "mean") {
      cfg.cosine_reduction = Reduction::kMean;
    } else {
      throw ConfigError(w + ".cosine_reduction must be 'sum' or 'mean'");
    }
  }
  if (j.contains("stage4_weighted")) cfg.stage4_weighted = get_bool(j, "stage4_weighted", w);
  if (j.contains("repeat_data")) cfg.repeat_data = get_bool(j, "repeat_data", w);
  if (j.contains("adamw")) {
    const auto& aj = j.at("adamw");
    const std::string aw = w + ".adamw";
    check_keys(aj, {"beta1", "beta2", "eps", "weight_decay"}, aw);
    if (aj.contains("beta1")) cfg.adamw.beta1 = get_real(aj, "beta1", aw);
    if (aj.contains("beta2")) cfg.adamw.beta2 = get_real(aj, "beta2", aw);
    if (aj.contains("eps")) cfg.adamw.eps = get_real(aj, "eps", aw);
    if (aj.contains("weight_decay")) cfg.adamw.weight_decay = get_real(aj, "weight_decay", aw);
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

StageConfig RunConfig::stage(int n, const StageOverrides& o) const {
  const auto it = stages.find(n);
  if (it == stages.end()) throw ConfigError("stage must be 1..4, got " + std::to_string(n));
  StageConfig cfg = it->second;
  if (o.steps) cfg.steps = *o.steps;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.lr) cfg.lr = *o.lr;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

std::size_t RunConfig::target_dim() const {
  std::size_t d = 0;
  if (synthetic) {
    for (auto t : synthetic->spec.teacher_dims) d += t;
  } else {
    for (const auto& p : files->teachers) d += read_embedding_file(p).dim();
  }
  return d;
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    check_keys(j, {"profile", "seed", "model", "data", "stages", "paths", "checkpoint_every"}, "config");
    RunConfig rc;
    if (j.contains("profile")) rc.profile = parse_profile(get_string(j, "profile", "config"));
    if (j.contains("seed")) rc.seed = get_count(j, "seed", "config");
    if (j.contains("checkpoint_every")) rc.checkpoint_every = get_count(j, "checkpoint_every", "config");
    rc.model = default_model(rc.profile);
    if (j.contains("model")) parse_model(j.at("model"), rc.model);

    const json data = j.contains("data") ? j.at("data") : json{{"synthetic", json::object()}};
    check_keys(data, {"synthetic", "files"}, "data");
    if (data.contains("synthetic") == data.contains("files"))
      throw ConfigError("data needs exactly one of 'synthetic' or 'files'");
    if (data.contains("synthetic")) {
      rc.synthetic = parse_synthetic(data.at("synthetic"), rc.profile, rc.model);
    } else {
      rc.files = parse_files(data.at("files"), base_dir);
    }

    for (int s = 1; s <= 4; ++s) {
      auto cfg = StageConfig::defaults(s, rc.profile);
      cfg.seed = rc.seed + static_cast<std::uint64_t>(s);
      rc.stages.emplace(s, cfg);
    }
    if (j.contains("stages")) {
      const auto& sj = j.at("stages");
      check_keys(sj, {"1", "2", "3", "4"}, "stages");
      for (const auto& [key, body] : sj.items()) parse_stage(body, rc.stages.at(std::stoi(key)));
    }

    rc.checkpoint_dir = base_dir / rc.checkpoint_dir;
    rc.metrics_dir = base_dir / rc.metrics_dir;
    rc.dump_dir = base_dir / rc.dump_dir;
    if (j.contains("paths")) {
      const auto& pj = j.at("paths");
      check_keys(pj, {"checkpoint_dir", "metrics_dir", "dump_dir"}, "paths");
      if (pj.contains("checkpoint_dir")) rc.checkpoint_dir = get_path(pj, "checkpoint_dir", "paths", base_dir);
      if (pj.contains("metrics_dir")) rc.metrics_dir = get_path(pj, "metrics_dir", "paths", base_dir);
      if (pj.contains("dump_dir")) rc.dump_dir = get_path(pj, "dump_dir", "paths", base_dir);
    }
    rc.checkpoint_dir = rc.checkpoint_dir.lexically_normal();
    rc.metrics_dir = rc.metrics_dir.lexically_normal();
    rc.dump_dir = rc.dump_dir.lexically_normal();
    return rc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return parse_run_config(read_text(path), dir);
}

EvalManifest load_eval_manifest(const std::filesystem::path& path) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    check_keys(j, {"base", "teachers", "retrieval"}, "manifest");
    EvalManifest m;
    m.base = get_path(j, "base", "manifest", dir);
    if (!j.at("teachers").is_array() || j.at("teachers").empty())
      throw ConfigError("manifest.teachers must be a non-empty array");
    for (const auto& t : j.at("teachers")) {
      std::filesystem::path p = t.get<std::string>();
      m.teachers.push_back(p.is_absolute() ? p : dir / p);
    }
    if (j.contains("retrieval")) {
      const auto& r = j.at("retrieval");
      check_keys(r, {"queries", "docs", "qrels"}, "manifest.retrieval");
      m.queries = get_path(r, "queries", "manifest.retrieval", dir);
      m.docs = get_path(r, "docs", "manifest.retrieval", dir);
      for (const auto& [q, d] : r.at("qrels").items()) m.qrels[q] = d.get<std::string>();
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad manifest value: ") + e.what());
  }
}

}  // namespace distillforge::cli

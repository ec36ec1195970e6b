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

#include "distillforge/model.hpp"

#include <cmath>

#include "distillforge/errors.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/rng.hpp"

namespace distillforge {

std::string_view to_string(Head h) noexcept {
  switch (h) {
    case Head::kFc1: return "fc1";
    case Head::kFc2: return "fc2";
    case Head::kFc3: return "fc3";
    case Head::kFc4: return "fc4";
  }
  return "?";
}

Head parse_head(std::string_view s) {
  for (auto h : kAllHeads)
    if (to_string(h) == s) return h;
  throw ConfigError("unknown head '" + std::string(s) + "'");
}

std::string_view to_string(ParamGroup g) noexcept {
  switch (g) {
    case ParamGroup::kFc1: return "fc1";
    case ParamGroup::kFc2: return "fc2";
    case ParamGroup::kFc3: return "fc3";
    case ParamGroup::kFc4: return "fc4";
    case ParamGroup::kTailLast3: return "tail_last3";
    case ParamGroup::kTailRest: return "tail_rest";
    case ParamGroup::kVision: return "vision";
  }
  return "?";
}

ParamGroup parse_param_group(std::string_view s) {
  for (std::size_t i = 0; i < kParamGroupCount; ++i) {
    const auto g = static_cast<ParamGroup>(i);
    if (to_string(g) == s) return g;
  }
  throw ConfigError("unknown parameter group '" + std::string(s) + "'");
}

std::vector<std::string> ParamGroupMask::names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kParamGroupCount; ++i) {
    const auto g = static_cast<ParamGroup>(i);
    if (contains(g)) out.emplace_back(to_string(g));
  }
  return out;
}

ParamGroupMask stage_mask(int stage) {
  switch (stage) {
    case 1: return {ParamGroup::kFc1};
    case 2: return {ParamGroup::kFc1, ParamGroup::kTailLast3};
    case 3:
      return {ParamGroup::kFc1, ParamGroup::kFc2, ParamGroup::kFc3,
              ParamGroup::kFc4, ParamGroup::kTailLast3, ParamGroup::kTailRest};
    case 4: return {ParamGroup::kVision};
    default: throw ConfigError("stage must be 1..4, got " + std::to_string(stage));
  }
}

void ModelConfig::validate() const {
  if (base_dim == 0 || hidden_dim == 0 || vision_dim == 0)
    throw ConfigError("model dimensions must be >= 1");
  if (tail_depth == 0) throw ConfigError("tail depth must be >= 1");
  for (auto d : head_dims)
    if (d == 0) throw ConfigError("head dimensions must be >= 1");
}

namespace {

ParamGroup tail_group(std::size_t layer, std::size_t depth) {
  const std::size_t last = depth < 3 ? depth : 3;
  return layer >= depth - last ? ParamGroup::kTailLast3 : ParamGroup::kTailRest;
}

constexpr std::array<ParamGroup, 4> kHeadGroups = {ParamGroup::kFc1, ParamGroup::kFc2,
                                                   ParamGroup::kFc3, ParamGroup::kFc4};

void add_affine(const Matrix& x, const Matrix& w, const Matrix& b, Matrix& out) {
  out = matmul(x, w);
  const auto bias = b.row(0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
}

Matrix column_sums(const Matrix& m) {
  Matrix s(1, m.cols());
  auto out = s.row(0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
  }
  return s;
}

}  // namespace

StudentNet::StudentNet(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  for (std::size_t l = 0; l < cfg_.tail_depth; ++l) {
    const std::size_t in = l == 0 ? cfg_.base_dim : cfg_.hidden_dim;
    const auto g = tail_group(l, cfg_.tail_depth);
    params_.push_back({"tail" + std::to_string(l) + ".weight", g, Matrix(in, cfg_.hidden_dim)});
    params_.push_back({"tail" + std::to_string(l) + ".bias", g, Matrix(1, cfg_.hidden_dim)});
  }
  for (auto h : kAllHeads) {
    const auto name = std::string(to_string(h));
    const auto g = kHeadGroups[index_of(h)];
    params_.push_back({name + ".weight", g, Matrix(cfg_.hidden_dim, cfg_.head_dim(h))});
    params_.push_back({name + ".bias", g, Matrix(1, cfg_.head_dim(h))});
  }
  params_.push_back({"vision.weight", ParamGroup::kVision, Matrix(cfg_.vision_dim, cfg_.base_dim)});
  params_.push_back({"vision.bias", ParamGroup::kVision, Matrix(1, cfg_.base_dim)});
}

StudentNet StudentNet::zeros(const ModelConfig& cfg) { return StudentNet(cfg); }

StudentNet StudentNet::init(const ModelConfig& cfg, std::uint64_t seed) {
  StudentNet net(cfg);
  const Rng root(seed, streams::kInit);
  for (std::size_t i = 0; i < net.params_.size(); ++i) {
    auto& p = net.params_[i];
    if (p.value.rows() == 1) continue;  // bias
    Rng rng = root.split((static_cast<std::uint64_t>(p.group) << 32) | i);
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.value.rows()));
    for (double& v : p.value.data()) v = rng.uniform(-scale, scale);
  }
  return net;
}

std::size_t StudentNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool operator==(const StudentNet& a, const StudentNet& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& x = a.params_[i];
    const auto& y = b.params_[i];
    if (x.name != y.name || x.group != y.group || !(x.value == y.value)) return false;
  }
  return true;
}

const Matrix& TextForward::out(Head h) const {
  const auto& o = heads[index_of(h)];
  if (!o) throw ConfigError("head " + std::string(to_string(h)) + " was not computed");
  return o->out;
}

TextForward forward_text(const StudentNet& net, const Matrix& base_features, const HeadSet& heads) {
  const auto& cfg = net.config();
  const auto& ps = net.params();
  if (base_features.cols() != cfg.base_dim) {
    throw DimMismatch("base features have " + std::to_string(base_features.cols()) +
                      " columns, model expects " + std::to_string(cfg.base_dim));
  }
  TextForward fwd;
  fwd.input = base_features;
  const Matrix* x = &fwd.input;
  for (std::size_t l = 0; l < cfg.tail_depth; ++l) {
    Matrix a;
    add_affine(*x, ps[net.tail_weight(l)].value, ps[net.tail_bias(l)].value, a);
    if (cfg.activation == Activation::kTanh)
      for (double& v : a.data()) v = std::tanh(v);
    fwd.tail_out.push_back(std::move(a));
    x = &fwd.tail_out.back();
  }
  for (auto h : heads) {
    HeadOutput ho;
    add_affine(*x, ps[net.head_weight(h)].value, ps[net.head_bias(h)].value, ho.raw);
    ho.norms = row_norms(ho.raw);
    ho.out = ho.raw;
    for (std::size_t r = 0; r < ho.out.rows(); ++r)
      for (double& v : ho.out.row(r)) v /= ho.norms[r];
    fwd.heads[index_of(h)] = std::move(ho);
  }
  return fwd;
}

std::map<Head, Matrix> embed_text(const StudentNet& net, const Matrix& base_features,
                                  const HeadSet& heads) {
  auto fwd = forward_text(net, base_features, heads);
  std::map<Head, Matrix> out;
  for (auto h : heads) out.emplace(h, std::move(fwd.heads[index_of(h)]->out));
  return out;
}

VisionForward forward_vision(const StudentNet& net, std::span<const Matrix> vision_tokens,
                             const HeadSet& heads) {
  const auto& cfg = net.config();
  const auto& w = net.params()[net.vision_weight()].value;
  const auto& b = net.params()[net.vision_bias()].value;
  VisionForward fwd;
  fwd.tokens.assign(vision_tokens.begin(), vision_tokens.end());
  fwd.mean_tokens = Matrix(vision_tokens.size(), cfg.vision_dim);
  Matrix pooled(vision_tokens.size(), cfg.base_dim);
  for (std::size_t i = 0; i < vision_tokens.size(); ++i) {
    const auto& tok = vision_tokens[i];
    if (tok.rows() == 0) throw EmptyTokenSequence("image " + std::to_string(i) + " has no tokens");
    if (tok.cols() != cfg.vision_dim) {
      throw DimMismatch("vision tokens have " + std::to_string(tok.cols()) +
                        " columns, model expects " + std::to_string(cfg.vision_dim));
    }
    Matrix projected;
    add_affine(tok, w, b, projected);
    const double inv = 1.0 / static_cast<double>(tok.rows());
    auto prow = pooled.row(i);
    auto mrow = fwd.mean_tokens.row(i);
    for (std::size_t r = 0; r < tok.rows(); ++r) {
      const auto pr = projected.row(r);
      const auto tr = tok.row(r);
      for (std::size_t c = 0; c < prow.size(); ++c) prow[c] += pr[c];
      for (std::size_t c = 0; c < mrow.size(); ++c) mrow[c] += tr[c];
    }
    for (double& v : prow) v *= inv;
    for (double& v : mrow) v *= inv;
  }
  fwd.text = forward_text(net, pooled, heads);
  return fwd;
}

ParamGrads ParamGrads::zeros_like(const StudentNet& net) {
  ParamGrads g;
  g.grads.reserve(net.params().size());
  for (const auto& p : net.params()) g.grads.emplace_back(p.value.rows(), p.value.cols());
  return g;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& o) {
  if (grads.size() != o.grads.size()) throw ShapeMismatch("ParamGrads size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += o.grads[i];
  return *this;
}

namespace {

/// Returns parameter grads; fills `d_input` with dL/d(base features) when requested.
ParamGrads backward_core(const StudentNet& net, const TextForward& fwd,
                         const HeadGradients& head_grads, ParamGroupMask mask, Matrix* d_input) {
  const auto& cfg = net.config();
  const auto& ps = net.params();
  ParamGrads grads = ParamGrads::zeros_like(net);
  const std::size_t depth = cfg.tail_depth;
  const Matrix& hidden = fwd.tail_out.back();
  const std::size_t m = hidden.rows();

  // Lowest tail layer that still needs an upstream gradient.
  std::size_t lowest = depth;
  for (std::size_t l = 0; l < depth; ++l) {
    if (mask.contains(tail_group(l, depth))) {
      lowest = l;
      break;
    }
  }
  if (d_input != nullptr) lowest = 0;
  const bool need_hidden = lowest < depth;

  Matrix d_hidden(m, cfg.hidden_dim);
  for (const auto& [h, g] : head_grads) {
    const auto& ho = fwd.heads[index_of(h)];
    if (!ho) throw ShapeMismatch("gradient given for head " + std::string(to_string(h)) +
                                 " that was not computed");
    if (!g.same_shape(ho->out)) throw ShapeMismatch("head gradient shape mismatch");
    const Matrix d_raw = normalize_rows_backward(ho->out, ho->norms, g);
    if (mask.contains(kHeadGroups[index_of(h)])) {
      grads.grads[net.head_weight(h)] = matmul_tn(hidden, d_raw);
      grads.grads[net.head_bias(h)] = column_sums(d_raw);
    }
    if (need_hidden) d_hidden += matmul_nt(d_raw, ps[net.head_weight(h)].value);
  }
  if (!need_hidden) return grads;

  for (std::size_t l = depth; l-- > lowest;) {
    Matrix d_pre = d_hidden;
    if (cfg.activation == Activation::kTanh) {
      const auto& y = fwd.tail_out[l];
      for (std::size_t i = 0; i < d_pre.size(); ++i) {
        const double yi = y.data()[i];
        d_pre.data()[i] *= 1.0 - yi * yi;
      }
    }
    const Matrix& x = l == 0 ? fwd.input : fwd.tail_out[l - 1];
    if (mask.contains(tail_group(l, depth))) {
      grads.grads[net.tail_weight(l)] = matmul_tn(x, d_pre);
      grads.grads[net.tail_bias(l)] = column_sums(d_pre);
    }
    if (l > lowest || d_input != nullptr) d_hidden = matmul_nt(d_pre, ps[net.tail_weight(l)].value);
  }
  if (d_input != nullptr) *d_input = std::move(d_hidden);
  return grads;
}

}  // namespace

ParamGrads backward_text(const StudentNet& net, const TextForward& fwd, const HeadGradients& head_grads,
                         ParamGroupMask mask) {
  return backward_core(net, fwd, head_grads, mask, nullptr);
}

ParamGrads backward_vision(const StudentNet& net, const VisionForward& fwd,
                           const HeadGradients& head_grads, ParamGroupMask mask) {
  if (!mask.contains(ParamGroup::kVision)) return backward_core(net, fwd.text, head_grads, mask, nullptr);
  Matrix d_pooled;
  ParamGrads grads = backward_core(net, fwd.text, head_grads, mask, &d_pooled);
  // pooled_i = mean_k(tok_ik) · W + b, so dW = Σ_i mean_iᵀ d_pooled_i.
  grads.grads[net.vision_weight()] = matmul_tn(fwd.mean_tokens, d_pooled);
  grads.grads[net.vision_bias()] = column_sums(d_pooled);
  return grads;
}

}  // namespace distillforge

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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distillforge/matrix.hpp"

namespace distillforge {

enum class Head : std::uint8_t { kFc1 = 0, kFc2 = 1, kFc3 = 2, kFc4 = 3 };
inline constexpr std::array<Head, 4> kAllHeads = {Head::kFc1, Head::kFc2, Head::kFc3, Head::kFc4};

std::string_view to_string(Head h) noexcept;
Head parse_head(std::string_view s);
constexpr std::size_t index_of(Head h) noexcept { return static_cast<std::size_t>(h); }

enum class ParamGroup : std::uint8_t {
  kFc1 = 0,
  kFc2 = 1,
  kFc3 = 2,
  kFc4 = 3,
  kTailLast3 = 4,
  kTailRest = 5,
  kVision = 6,
};
inline constexpr std::size_t kParamGroupCount = 7;

std::string_view to_string(ParamGroup g) noexcept;
ParamGroup parse_param_group(std::string_view s);

/// Set of trainable parameter groups.
class ParamGroupMask {
 public:
  constexpr ParamGroupMask() = default;
  constexpr ParamGroupMask(std::initializer_list<ParamGroup> groups) {
    for (auto g : groups) bits_ |= bit(g);
  }
  static constexpr ParamGroupMask all() {
    ParamGroupMask m;
    m.bits_ = (1u << kParamGroupCount) - 1;
    return m;
  }

  constexpr bool contains(ParamGroup g) const { return (bits_ & bit(g)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  static constexpr ParamGroupMask from_bits(std::uint8_t b) {
    ParamGroupMask m;
    m.bits_ = static_cast<std::uint8_t>(b & ((1u << kParamGroupCount) - 1));
    return m;
  }
  std::vector<std::string> names() const;
  friend constexpr bool operator==(ParamGroupMask, ParamGroupMask) = default;

 private:
  static constexpr std::uint8_t bit(ParamGroup g) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(g));
  }
  std::uint8_t bits_ = 0;
};

/// Trainable groups per training stage:
/// 1 → {fc1}; 2 → {fc1, tail_last3}; 3 → every text group; 4 → {vision}.
ParamGroupMask stage_mask(int stage);

enum class Activation : std::uint8_t { kTanh = 0, kIdentity = 1 };

struct ModelConfig {
  std::size_t base_dim = 24;
  std::size_t hidden_dim = 32;
  std::size_t tail_depth = 3;
  std::array<std::size_t, 4> head_dims = {40, 32, 16, 8};
  std::size_t vision_dim = 20;
  Activation activation = Activation::kTanh;

  std::size_t head_dim(Head h) const { return head_dims[index_of(h)]; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Parameter {
  std::string name;
  ParamGroup group;
  Matrix value;
};

/// Desk-scale student: frozen base features → affine+activation tail →
/// independent affine heads FC1..FC4, each row-normalized. A vision path
/// projects token features to base_dim and mean-pools them per image, then
/// reuses the text path.
class StudentNet {
 public:
  /// Weights ~ U(-1/√fan_in, 1/√fan_in), biases zero; drawn per (seed, parameter).
  static StudentNet init(const ModelConfig& cfg, std::uint64_t seed);
  /// Empty parameter tensors of the right shapes (for loading).
  static StudentNet zeros(const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  std::vector<Parameter>& params() noexcept { return params_; }
  const std::vector<Parameter>& params() const noexcept { return params_; }

  std::size_t tail_weight(std::size_t layer) const { return 2 * layer; }
  std::size_t tail_bias(std::size_t layer) const { return 2 * layer + 1; }
  std::size_t head_weight(Head h) const { return 2 * cfg_.tail_depth + 2 * index_of(h); }
  std::size_t head_bias(Head h) const { return head_weight(h) + 1; }
  std::size_t vision_weight() const { return 2 * cfg_.tail_depth + 8; }
  std::size_t vision_bias() const { return vision_weight() + 1; }

  std::size_t parameter_count() const noexcept;

  friend bool operator==(const StudentNet& a, const StudentNet& b);

 private:
  explicit StudentNet(const ModelConfig& cfg);

  ModelConfig cfg_;
  std::vector<Parameter> params_;
};

bool operator==(const StudentNet& a, const StudentNet& b);

struct HeadOutput {
  Matrix raw;                  // pre-normalization
  std::vector<double> norms;   // row norms of raw
  Matrix out;                  // unit rows
};

/// Everything backward needs from a text forward pass.
struct TextForward {
  Matrix input;
  std::vector<Matrix> tail_out;  // activation outputs per layer
  std::array<std::optional<HeadOutput>, 4> heads;

  const Matrix& out(Head h) const;
};

struct VisionForward {
  std::vector<Matrix> tokens;
  Matrix mean_tokens;  // images x vision_dim
  TextForward text;
};

using HeadSet = std::vector<Head>;

TextForward forward_text(const StudentNet& net, const Matrix& base_features, const HeadSet& heads);
VisionForward forward_vision(const StudentNet& net, std::span<const Matrix> vision_tokens,
                             const HeadSet& heads);

/// Convenience: just the unit-row outputs.
std::map<Head, Matrix> embed_text(const StudentNet& net, const Matrix& base_features,
                                  const HeadSet& heads);

/// Gradients aligned with StudentNet::params(); frozen groups are exact zeros.
struct ParamGrads {
  std::vector<Matrix> grads;

  static ParamGrads zeros_like(const StudentNet& net);
  ParamGrads& operator+=(const ParamGrads& o);
};

using HeadGradients = std::map<Head, Matrix>;

ParamGrads backward_text(const StudentNet& net, const TextForward& fwd, const HeadGradients& head_grads,
                         ParamGroupMask mask);
ParamGrads backward_vision(const StudentNet& net, const VisionForward& fwd,
                           const HeadGradients& head_grads, ParamGroupMask mask);

}  // namespace distillforge

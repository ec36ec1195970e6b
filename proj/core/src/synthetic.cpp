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

#include "distillforge/synthetic.hpp"

#include <cmath>

#include "distillforge/errors.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/rng.hpp"

namespace distillforge {

namespace {
constexpr std::uint64_t kEncoderStream = 11;
constexpr std::uint64_t kVisionStream = 12;
constexpr std::uint64_t kTokenNoiseStream = 13;
constexpr std::uint64_t kQueryNoiseStream = 14;
}  // namespace

SyntheticWorld::SyntheticWorld(SyntheticSpec spec) : spec_(std::move(spec)) {
  if (spec_.latent_dim == 0 || spec_.base_dim == 0 || spec_.vision_dim == 0 ||
      spec_.teacher_dims.empty() || spec_.tokens_per_image == 0) {
    throw ConfigError("synthetic world: dimensions must be >= 1 and at least one teacher given");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec_.latent_dim));
  Rng enc(spec_.seed, kEncoderStream);
  encoder_ = random_normal(spec_.latent_dim, spec_.base_dim, scale, enc);
  Rng vis(spec_.seed, kVisionStream);
  vision_ = random_normal(spec_.latent_dim, spec_.vision_dim, scale, vis);
  for (std::size_t k = 0; k < spec_.teacher_dims.size(); ++k) {
    teachers_.push_back(make_synthetic_teacher("teacher" + std::to_string(k), spec_.latent_dim,
                                               spec_.teacher_dims[k], mix64(spec_.seed + k)));
  }
}

Matrix SyntheticWorld::latents(std::size_t n, std::uint64_t partition) const {
  Rng rng(spec_.seed, mix64(streams::kDataGen) ^ partition);
  return random_normal(n, spec_.latent_dim, 1.0, rng);
}

Matrix SyntheticWorld::base_features(const Matrix& latents) const {
  return matmul(latents, encoder_);
}

TextDataset SyntheticWorld::text_dataset(std::size_t n, std::uint64_t partition) const {
  const Matrix z = latents(n, partition);
  TextDataset ds;
  for (std::size_t i = 0; i < n; ++i)
    ds.ids.push_back("p" + std::to_string(partition) + "-" + std::to_string(i));
  ds.base = base_features(z);
  for (const auto& t : teachers_) ds.teacher_outputs.push_back(synth_teacher_embed(t, z));
  ds.teacher = fuse(ds.teacher_outputs);
  return ds;
}

VisionDataset SyntheticWorld::vision_dataset(std::size_t n, std::uint64_t partition) const {
  const Matrix z = latents(n, partition);
  VisionDataset ds;
  ds.caption_base = base_features(z);
  const Matrix view = matmul(z, vision_);
  Rng noise(spec_.seed, mix64(kTokenNoiseStream) ^ partition);
  for (std::size_t i = 0; i < n; ++i) {
    ds.ids.push_back("img" + std::to_string(partition) + "-" + std::to_string(i));
    Matrix tok(spec_.tokens_per_image, spec_.vision_dim);
    for (std::size_t k = 0; k < tok.rows(); ++k)
      for (std::size_t c = 0; c < tok.cols(); ++c)
        tok(k, c) = view(i, c) + spec_.token_noise * noise.normal();
    ds.image_tokens.push_back(std::move(tok));
  }
  return ds;
}

RetrievalSet SyntheticWorld::retrieval_set(std::size_t n, std::uint64_t partition) const {
  const Matrix z = latents(n, partition);
  Matrix zq = z;
  Rng noise(spec_.seed, mix64(kQueryNoiseStream) ^ partition);
  for (double& v : zq.data()) v += spec_.query_noise * noise.normal();
  RetrievalSet rs;
  rs.doc_base = base_features(z);
  rs.query_base = base_features(zq);
  for (std::size_t i = 0; i < n; ++i) rs.qrels.push_back(i);
  return rs;
}

}  // namespace distillforge

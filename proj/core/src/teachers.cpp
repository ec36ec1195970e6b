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

#include "distillforge/teachers.hpp"

#include <cmath>
#include <unordered_map>

#include "distillforge/datakit.hpp"
#include "distillforge/errors.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/rng.hpp"

namespace distillforge {

TeacherSource make_synthetic_teacher(std::string id, std::size_t latent_dim, std::size_t dim,
                                     std::uint64_t seed) {
  if (dim == 0 || latent_dim == 0) throw ConfigError("teacher dims must be >= 1");
  Rng rng(seed, streams::kTeacher);
  TeacherSource src;
  src.id = std::move(id);
  src.dim = dim;
  src.kind = TeacherKind::kSyntheticLinear;
  src.weights = random_normal(latent_dim, dim, 1.0 / std::sqrt(static_cast<double>(latent_dim)), rng);
  src.seed = seed;
  return src;
}

Matrix synth_teacher_embed(const TeacherSource& source, const Matrix& latents) {
  if (source.kind != TeacherKind::kSyntheticLinear)
    throw ConfigError("teacher '" + source.id + "' is not synthetic");
  if (latents.cols() != source.latent_dim()) {
    throw DimMismatch("teacher '" + source.id + "' expects latent dim " +
                      std::to_string(source.latent_dim()) + ", got " +
                      std::to_string(latents.cols()));
  }
  return normalize_rows(matmul(latents, source.weights));
}

Matrix load_teacher_embeddings(const std::filesystem::path& path,
                               std::span<const std::string> keys) {
  const auto set = read_embedding_file(path);
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(set.ids.size());
  for (std::size_t r = 0; r < set.ids.size(); ++r) index.emplace(set.ids[r], r);
  std::vector<std::size_t> rows;
  rows.reserve(keys.size());
  for (const auto& k : keys) {
    const auto it = index.find(k);
    if (it == index.end()) throw MissingKey(k);
    rows.push_back(it->second);
  }
  // Renormalize even if the producer already did: f32 storage drifts off unit norm.
  return normalize_rows(gather_rows(set.values, rows));
}

FusedTeacherTarget fuse(std::span<const Matrix> teacher_outputs) {
  if (teacher_outputs.empty()) throw ConfigError("fuse: need at least one teacher");
  const std::size_t rows = teacher_outputs.front().rows();
  std::vector<Matrix> blocks;
  blocks.reserve(teacher_outputs.size());
  FusedTeacherTarget out;
  for (const auto& t : teacher_outputs) {
    if (t.rows() != rows) throw BatchMismatch("fuse: teachers disagree on batch size");
    blocks.push_back(normalize_rows(t));
    out.block_dims.push_back(t.cols());
  }
  out.matrix = normalize_rows(hconcat(blocks));
  return out;
}

}  // namespace distillforge

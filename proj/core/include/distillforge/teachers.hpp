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
#include <span>
#include <string>
#include <vector>

#include "distillforge/matrix.hpp"

namespace distillforge {

enum class TeacherKind { kFileBacked, kSyntheticLinear };

/// A frozen teacher. Synthetic teachers are fixed random linear maps of a
/// shared latent space, so two teachers see the same text through different
/// but correlated lenses.
struct TeacherSource {
  std::string id;
  std::size_t dim = 0;
  TeacherKind kind = TeacherKind::kSyntheticLinear;
  Matrix weights;  // latent_dim x dim; synthetic only
  std::uint64_t seed = 0;
  std::filesystem::path path;  // file-backed only

  std::size_t latent_dim() const noexcept { return weights.rows(); }
};

TeacherSource make_synthetic_teacher(std::string id, std::size_t latent_dim, std::size_t dim,
                                     std::uint64_t seed);

/// normalize_rows(latents · W)
Matrix synth_teacher_embed(const TeacherSource& source, const Matrix& latents);

/// Rows of `path` in `keys` order, each L2-normalized. Throws MissingKey.
Matrix load_teacher_embeddings(const std::filesystem::path& path,
                               std::span<const std::string> keys);

/// Multi-teacher target: each teacher block normalized, blocks concatenated,
/// the concatenation normalized again.
struct FusedTeacherTarget {
  std::vector<std::size_t> block_dims;
  Matrix matrix;

  std::size_t dim() const noexcept { return matrix.cols(); }
};

FusedTeacherTarget fuse(std::span<const Matrix> teacher_outputs);

}  // namespace distillforge

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
#include <string>
#include <vector>

#include "distillforge/matrix.hpp"
#include "distillforge/teachers.hpp"

namespace distillforge {

/// Text items: frozen base features for the student and the fused teacher
/// target for the same texts, row-aligned.
struct TextDataset {
  std::vector<std::string> ids;
  Matrix base;
  FusedTeacherTarget teacher;
  /// Unfused per-teacher outputs, kept for diagnostics.
  std::vector<Matrix> teacher_outputs;

  std::size_t size() const noexcept { return ids.size(); }
};

/// (image, caption) pairs for the vision stage.
struct VisionDataset {
  std::vector<std::string> ids;
  std::vector<Matrix> image_tokens;
  Matrix caption_base;

  std::size_t size() const noexcept { return ids.size(); }
};

/// Query/document retrieval fixture: query i is relevant to document qrels[i].
struct RetrievalSet {
  Matrix query_base;
  Matrix doc_base;
  std::vector<std::size_t> qrels;
};

struct SyntheticSpec {
  std::size_t latent_dim = 12;
  std::size_t base_dim = 24;
  std::vector<std::size_t> teacher_dims = {16, 24};
  std::size_t vision_dim = 20;
  std::size_t tokens_per_image = 4;
  double token_noise = 0.1;
  double query_noise = 0.3;
  std::uint64_t seed = 7;
};

/// Every observable is a fixed function of a per-item Gaussian latent:
/// base features are a frozen linear "encoder" of it, each teacher is a
/// frozen random linear map of it, and image tokens are a second linear view
/// plus noise.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(SyntheticSpec spec);

  const SyntheticSpec& spec() const noexcept { return spec_; }
  const std::vector<TeacherSource>& teachers() const noexcept { return teachers_; }

  /// `partition` selects an independent latent stream (e.g. 0 = train, 1 = eval).
  Matrix latents(std::size_t n, std::uint64_t partition) const;
  Matrix base_features(const Matrix& latents) const;
  TextDataset text_dataset(std::size_t n, std::uint64_t partition) const;
  VisionDataset vision_dataset(std::size_t n, std::uint64_t partition) const;
  /// Queries are noisy copies of each document's latent.
  RetrievalSet retrieval_set(std::size_t n, std::uint64_t partition) const;

 private:
  SyntheticSpec spec_;
  Matrix encoder_;  // latent_dim x base_dim
  Matrix vision_;   // latent_dim x vision_dim
  std::vector<TeacherSource> teachers_;
};

}  // namespace distillforge

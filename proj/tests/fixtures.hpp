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

// Synthetic corpora shared by the datakit tests and the acceptance suite.

#include <string>

#include "distillforge/datakit.hpp"
#include "distillforge/rng.hpp"

namespace fixtures {

inline std::string random_sentence(distillforge::Rng& rng) {
  static const char* const kWords[] = {"alpha", "beta", "gamma", "delta", "river", "stone",
                                       "light", "model", "vector", "quiet", "north", "paper"};
  static const char* const kEnds[] = {".", "!", "?"};
  std::string s = "Word";
  const std::size_t n = 2 + rng.uniform_int(8);
  for (std::size_t i = 0; i < n; ++i) {
    s += ' ';
    s += kWords[rng.uniform_int(12)];
  }
  s += kEnds[rng.uniform_int(3)];
  return s;
}

/// `n` passages of 1..25 sentences each.
inline distillforge::Corpus synthetic_corpus(std::size_t n, std::uint64_t seed) {
  distillforge::Rng rng(seed, distillforge::streams::kTest);
  distillforge::Corpus corpus;
  corpus.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    const std::size_t sentences = 1 + rng.uniform_int(25);
    for (std::size_t k = 0; k < sentences; ++k) {
      if (k) text += ' ';
      text += random_sentence(rng);
    }
    corpus.push_back({"doc" + std::to_string(i), text, distillforge::RecordKind::kPassage, ""});
  }
  return corpus;
}

}  // namespace fixtures

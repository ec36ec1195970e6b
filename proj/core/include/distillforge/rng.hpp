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

namespace distillforge {

/// Well-known stream ids so that data preparation, initialization and
/// batching never share draws.
namespace streams {
inline constexpr std::uint64_t kDataGen = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kBatching = 3;
inline constexpr std::uint64_t kTransformSelect = 4;
inline constexpr std::uint64_t kTransformChunk = 5;
inline constexpr std::uint64_t kTransformShuffle = 6;
inline constexpr std::uint64_t kTeacher = 7;
inline constexpr std::uint64_t kTest = 99;
}  // namespace streams

/// Counter-based generator: draw k of stream (seed, stream) is a pure
/// function of (seed, stream, k). The position is a single integer, which is
/// what checkpoints persist.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0) noexcept
      : seed_(seed), stream_(stream), counter_(counter) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal() noexcept;

  /// Independent child stream derived from this stream's identity.
  Rng split(std::uint64_t child) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace distillforge

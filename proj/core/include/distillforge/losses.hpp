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
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "distillforge/matrix.hpp"

namespace distillforge {

/// λ1..λ3 weight the cosine, similarity and relative-similarity losses.
struct LossWeights {
  double lambda1 = 10.0;
  double lambda2 = 200.0;
  double lambda3 = 20.0;
  double margin = 0.015;

  void validate() const;
};

enum class LossKind : std::uint8_t { kCosine = 1, kSim = 2, kResim = 4 };

/// Bit set over LossKind.
class LossSet {
 public:
  constexpr LossSet() = default;
  constexpr LossSet(std::initializer_list<LossKind> kinds) {
    for (auto k : kinds) bits_ |= static_cast<std::uint8_t>(k);
  }
  static constexpr LossSet all() { return {LossKind::kCosine, LossKind::kSim, LossKind::kResim}; }
  static constexpr LossSet from_bits(std::uint8_t b) {
    LossSet s;
    s.bits_ = static_cast<std::uint8_t>(b & 7u);
    return s;
  }

  constexpr bool has(LossKind k) const { return (bits_ & static_cast<std::uint8_t>(k)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  friend constexpr bool operator==(LossSet, LossSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view s);

/// Value plus gradient with respect to the student matrix S.
struct LossValue {
  double value = 0.0;
  Matrix grad;
};

enum class Reduction { kSum, kMean };

/// Σ_x (1 - s_x·t_x); gradient row x is -t_x (scaled by 1/m for kMean).
LossValue cosine_loss(const Matrix& s, const Matrix& t, Reduction reduction = Reduction::kSum);

/// Mean over all m² entries of (S Sᵀ - T Tᵀ)²; gradient (4/m²)(S Sᵀ - T Tᵀ) S.
/// Column counts of S and T may differ.
LossValue sim_loss(const Matrix& s, const Matrix& t);

/// Unordered index pairs (i < j) in lexicographic order.
std::vector<std::pair<std::size_t, std::size_t>> enumerate_pairs(std::size_t m);

/// C(C(m,2), 2): the number of pair-of-pairs comparisons in a batch of m.
std::uint64_t pair_count(std::uint64_t m);

struct ResimValue {
  double value = 0.0;
  Matrix grad;
  std::size_t active_hinges = 0;
};

/// Hinge over every pair-of-pairs whose teacher similarities are strictly
/// ordered: max(0, s_m·s_n - s_i·s_j + margin) when t_i·t_j > t_m·t_n, summed
/// and divided by pair_count(m). Ties contribute nothing.
ResimValue resim_loss(const Matrix& s, const Matrix& t, double margin);

/// Same loss computed from pair-similarity vectors directly (indexed like
/// enumerate_pairs). `grad` receives d value / d student_sims.
struct ResimPairValue {
  double value = 0.0;
  std::vector<double> grad;
  std::size_t active_hinges = 0;
};
ResimPairValue resim_from_pair_sims(std::span<const double> student_sims,
                                    std::span<const double> teacher_sims, double margin,
                                    std::uint64_t n_divisor);

/// O(P log P) evaluation of resim_loss (P = C(m,2)) by sweeping pairs in
/// teacher order with Fenwick trees over student similarities. Agrees with
/// resim_loss up to summation order.
ResimValue resim_loss_sorted(const Matrix& s, const Matrix& t, double margin);

struct LossReport {
  double cosine = 0.0;
  double sim = 0.0;
  double resim = 0.0;
  double total = 0.0;
  std::size_t active_hinges = 0;
};

struct CombinedLoss {
  LossReport report;
  Matrix grad;
};

/// λ-weighted sum of the active components. Inactive components report 0.
/// Throws CosineDimMismatch when cosine is active and S, T widths differ.
CombinedLoss combined_loss(const Matrix& s, const Matrix& t, const LossWeights& w, LossSet active,
                           Reduction cosine_reduction = Reduction::kSum);

}  // namespace distillforge

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

#include "distillforge/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "distillforge/errors.hpp"

namespace distillforge {

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0))
    throw ConfigError("loss weights must be non-negative");
  if (!(margin >= 0.0 && margin < 2.0)) throw ConfigError("margin must lie in [0, 2)");
}

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::kCosine: return "cosine";
    case LossKind::kSim: return "sim";
    case LossKind::kResim: return "resim";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "cosine") return LossKind::kCosine;
  if (s == "sim") return LossKind::kSim;
  if (s == "resim") return LossKind::kResim;
  throw ConfigError("unknown loss '" + std::string(s) + "'");
}

LossValue cosine_loss(const Matrix& s, const Matrix& t, Reduction reduction) {
  if (!s.same_shape(t)) {
    throw ShapeMismatch("cosine_loss: student " + std::to_string(s.rows()) + "x" +
                        std::to_string(s.cols()) + " vs teacher " + std::to_string(t.rows()) +
                        "x" + std::to_string(t.cols()));
  }
  const std::size_t m = s.rows();
  const double scale = (reduction == Reduction::kMean && m > 0) ? 1.0 / static_cast<double>(m) : 1.0;
  LossValue out{0.0, Matrix(m, s.cols())};
  for (std::size_t x = 0; x < m; ++x) out.value += 1.0 - dot(s.row(x), t.row(x));
  out.value *= scale;
  for (std::size_t i = 0; i < t.size(); ++i) out.grad.data()[i] = -scale * t.data()[i];
  return out;
}

LossValue sim_loss(const Matrix& s, const Matrix& t) {
  if (s.rows() != t.rows()) throw BatchMismatch("sim_loss: student and teacher batch sizes differ");
  const std::size_t m = s.rows();
  LossValue out{0.0, Matrix(m, s.cols())};
  if (m == 0) return out;
  Matrix diff(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = dot(s.row(i), s.row(j)) - dot(t.row(i), t.row(j));
      diff(i, j) = d;
      out.value += d * d;
    }
  }
  const double mm = static_cast<double>(m) * static_cast<double>(m);
  out.value /= mm;
  out.grad = matmul(diff, s);
  out.grad *= 4.0 / mm;
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> enumerate_pairs(std::size_t m) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(m < 2 ? 0 : m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  return pairs;
}

std::uint64_t pair_count(std::uint64_t m) {
  if (m < 3) return 0;
  const std::uint64_t p = m * (m - 1) / 2;
  return p * (p - 1) / 2;
}

namespace {

void check_resim_shapes(const Matrix& s, const Matrix& t) {
  if (s.rows() != t.rows()) throw ShapeMismatch("resim_loss: student and teacher batch sizes differ");
}

std::vector<double> pair_sims(const Matrix& x,
                              const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<double> sims(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    sims[p] = dot(x.row(pairs[p].first), x.row(pairs[p].second));
  return sims;
}

Matrix pair_grad_to_rows(const Matrix& s,
                         const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                         std::span<const double> pair_grad) {
  Matrix grad(s.rows(), s.cols());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double g = pair_grad[p];
    if (g == 0.0) continue;
    const auto [i, j] = pairs[p];
    auto gi = grad.row(i);
    auto gj = grad.row(j);
    const auto si = s.row(i);
    const auto sj = s.row(j);
    for (std::size_t c = 0; c < s.cols(); ++c) {
      gi[c] += g * sj[c];
      gj[c] += g * si[c];
    }
  }
  return grad;
}

}  // namespace

ResimPairValue resim_from_pair_sims(std::span<const double> student_sims,
                                    std::span<const double> teacher_sims, double margin,
                                    std::uint64_t n_divisor) {
  if (student_sims.size() != teacher_sims.size())
    throw ShapeMismatch("resim: pair similarity vectors differ in length");
  const std::size_t n_pairs = student_sims.size();
  ResimPairValue out;
  out.grad.assign(n_pairs, 0.0);
  if (n_divisor == 0) return out;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    for (std::size_t q = p + 1; q < n_pairs; ++q) {
      std::size_t hi = p;
      std::size_t lo = q;
      if (teacher_sims[p] > teacher_sims[q]) {
      } else if (teacher_sims[q] > teacher_sims[p]) {
        std::swap(hi, lo);
      } else {
        continue;
      }
      const double arg = student_sims[lo] - student_sims[hi] + margin;
      if (arg > 0.0) {
        out.value += arg;
        out.grad[lo] += 1.0;
        out.grad[hi] -= 1.0;
        ++out.active_hinges;
      }
    }
  }
  const double n = static_cast<double>(n_divisor);
  out.value /= n;
  for (double& g : out.grad) g /= n;
  return out;
}

ResimValue resim_loss(const Matrix& s, const Matrix& t, double margin) {
  check_resim_shapes(s, t);
  const auto pairs = enumerate_pairs(s.rows());
  const auto ss = pair_sims(s, pairs);
  const auto ts = pair_sims(t, pairs);
  auto pv = resim_from_pair_sims(ss, ts, margin, pair_count(s.rows()));
  return {pv.value, pair_grad_to_rows(s, pairs, pv.grad), pv.active_hinges};
}

namespace {

/// Fenwick tree over positions [0, n) accumulating counts and sums.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : count_(n + 1, 0), sum_(n + 1, 0.0) {}

  void add(std::size_t pos, double v) {
    for (std::size_t i = pos + 1; i < count_.size(); i += i & (~i + 1)) {
      ++count_[i];
      sum_[i] += v;
    }
  }

  /// Count and sum over positions [0, end).
  std::pair<std::uint64_t, double> prefix(std::size_t end) const {
    std::uint64_t c = 0;
    double s = 0.0;
    for (std::size_t i = end; i > 0; i -= i & (~i + 1)) {
      c += count_[i];
      s += sum_[i];
    }
    return {c, s};
  }

 private:
  std::vector<std::uint64_t> count_;
  std::vector<double> sum_;
};

}  // namespace

ResimValue resim_loss_sorted(const Matrix& s, const Matrix& t, double margin) {
  check_resim_shapes(s, t);
  const auto pairs = enumerate_pairs(s.rows());
  const std::size_t n_pairs = pairs.size();
  const auto ss = pair_sims(s, pairs);
  const auto ts = pair_sims(t, pairs);
  const std::uint64_t n_div = pair_count(s.rows());
  ResimValue out{0.0, Matrix(s.rows(), s.cols()), 0};
  if (n_div == 0) return out;

  // Slot of each pair in ascending student-similarity order.
  std::vector<std::size_t> by_student(n_pairs);
  std::iota(by_student.begin(), by_student.end(), std::size_t{0});
  std::ranges::stable_sort(by_student, [&](std::size_t a, std::size_t b) { return ss[a] < ss[b]; });
  std::vector<double> sorted_ss(n_pairs);
  std::vector<std::size_t> slot(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    sorted_ss[k] = ss[by_student[k]];
    slot[by_student[k]] = k;
  }

  std::vector<std::size_t> by_teacher(n_pairs);
  std::iota(by_teacher.begin(), by_teacher.end(), std::size_t{0});
  std::ranges::stable_sort(by_teacher, [&](std::size_t a, std::size_t b) { return ts[a] < ts[b]; });

  std::vector<double> pair_grad(n_pairs, 0.0);
  double total = 0.0;

  // Ascending sweep: pair p as the teacher-preferred side against every
  // strictly lower pair q with ss[q] > ss[p] - margin.
  {
    Fenwick tree(n_pairs);
    std::uint64_t inserted = 0;
    double inserted_sum = 0.0;
    for (std::size_t g = 0; g < n_pairs;) {
      std::size_t e = g;
      while (e < n_pairs && ts[by_teacher[e]] == ts[by_teacher[g]]) ++e;
      for (std::size_t k = g; k < e; ++k) {
        const std::size_t p = by_teacher[k];
        const double threshold = ss[p] - margin;
        const auto first = static_cast<std::size_t>(
            std::ranges::upper_bound(sorted_ss, threshold) - sorted_ss.begin());
        const auto [below_c, below_s] = tree.prefix(first);
        const std::uint64_t cnt = inserted - below_c;
        const double sum = inserted_sum - below_s;
        if (cnt > 0) {
          total += sum - static_cast<double>(cnt) * threshold;
          pair_grad[p] -= static_cast<double>(cnt);
          out.active_hinges += cnt;
        }
      }
      for (std::size_t k = g; k < e; ++k) {
        const std::size_t p = by_teacher[k];
        tree.add(slot[p], ss[p]);
        ++inserted;
        inserted_sum += ss[p];
      }
      g = e;
    }
  }

  // Descending sweep: pair q as the dispreferred side; count strictly higher
  // pairs p with ss[p] < ss[q] + margin.
  {
    Fenwick tree(n_pairs);
    for (std::size_t g = n_pairs; g > 0;) {
      std::size_t e = g;
      while (e > 0 && ts[by_teacher[e - 1]] == ts[by_teacher[g - 1]]) --e;
      for (std::size_t k = e; k < g; ++k) {
        const std::size_t q = by_teacher[k];
        const auto end = static_cast<std::size_t>(
            std::ranges::lower_bound(sorted_ss, ss[q] + margin) - sorted_ss.begin());
        pair_grad[q] += static_cast<double>(tree.prefix(end).first);
      }
      for (std::size_t k = e; k < g; ++k) tree.add(slot[by_teacher[k]], 0.0);
      g = e;
    }
  }

  const double n = static_cast<double>(n_div);
  out.value = total / n;
  for (double& g : pair_grad) g /= n;
  out.grad = pair_grad_to_rows(s, pairs, pair_grad);
  return out;
}

CombinedLoss combined_loss(const Matrix& s, const Matrix& t, const LossWeights& w, LossSet active,
                           Reduction cosine_reduction) {
  if (s.rows() != t.rows()) throw BatchMismatch("combined_loss: batch sizes differ");
  CombinedLoss out{{}, Matrix(s.rows(), s.cols())};
  if (active.has(LossKind::kCosine)) {
    if (s.cols() != t.cols()) {
      throw CosineDimMismatch("cosine loss needs equal widths, got student " +
                              std::to_string(s.cols()) + " vs teacher " + std::to_string(t.cols()));
    }
    auto c = cosine_loss(s, t, cosine_reduction);
    out.report.cosine = c.value;
    out.report.total += w.lambda1 * c.value;
    c.grad *= w.lambda1;
    out.grad += c.grad;
  }
  if (active.has(LossKind::kSim)) {
    auto c = sim_loss(s, t);
    out.report.sim = c.value;
    out.report.total += w.lambda2 * c.value;
    c.grad *= w.lambda2;
    out.grad += c.grad;
  }
  if (active.has(LossKind::kResim)) {
    auto c = resim_loss(s, t, w.margin);
    out.report.resim = c.value;
    out.report.active_hinges = c.active_hinges;
    out.report.total += w.lambda3 * c.value;
    c.grad *= w.lambda3;
    out.grad += c.grad;
  }
  return out;
}

}  // namespace distillforge

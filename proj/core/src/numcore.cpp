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

#include "distillforge/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "distillforge/errors.hpp"

namespace distillforge {

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> norms(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double n = norm(m.row(r));
    // NaN rows pass through so the caller sees a non-finite loss.
    if (n < kZeroNormThreshold) throw ZeroNormRow(r);
    norms[r] = n;
  }
  return norms;
}

Matrix normalize_rows(const Matrix& m) {
  const auto norms = row_norms(m);
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double& v : out.row(r)) v /= norms[r];
  }
  return out;
}

Matrix normalize_rows_backward(const Matrix& normalized, std::span<const double> norms,
                               const Matrix& upstream) {
  if (!normalized.same_shape(upstream) || norms.size() != normalized.rows()) {
    throw ShapeMismatch("normalize_rows_backward: shape mismatch");
  }
  Matrix out(upstream.rows(), upstream.cols());
  for (std::size_t r = 0; r < upstream.rows(); ++r) {
    const auto y = normalized.row(r);
    const auto g = upstream.row(r);
    const double proj = dot(y, g);
    auto o = out.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] = (g[c] - y[c] * proj) / norms[r];
  }
  return out;
}

Matrix gram(const Matrix& m) {
  const std::size_t n = m.rows();
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(m.row(i), m.row(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw Error("finite_diff_grad: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NonFiniteEvaluation("finite_diff_grad: non-finite probe at coordinate " +
                                std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw ShapeMismatch("max_relative_error: length mismatch");
  double diff = 0.0;
  double scale = 1e-12;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = stddev * rng.normal();
  return m;
}

Matrix random_orthogonal(std::size_t d, Rng& rng) {
  if (d == 0) throw Error("random_orthogonal: dimension must be >= 1");
  // Rows of q are orthonormalized one at a time; two passes of modified
  // Gram-Schmidt keep QᵀQ at round-off level.
  Matrix q = random_normal(d, d, 1.0, rng);
  for (std::size_t i = 0; i < d; ++i) {
    auto qi = q.row(i);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto qj = q.row(j);
        const double p = dot(qi, qj);
        for (std::size_t k = 0; k < d; ++k) qi[k] -= p * qj[k];
      }
    }
    double n = norm(qi);
    while (n < 1e-8) {  // degenerate draw; resample this row
      for (double& v : qi) v = rng.normal();
      for (std::size_t j = 0; j < i; ++j) {
        const auto qj = q.row(j);
        const double p = dot(qi, qj);
        for (std::size_t k = 0; k < d; ++k) qi[k] -= p * qj[k];
      }
      n = norm(qi);
    }
    for (double& v : qi) v /= n;
  }
  return q;
}

}  // namespace distillforge

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
#include <functional>
#include <span>
#include <vector>

#include "distillforge/matrix.hpp"
#include "distillforge/rng.hpp"

namespace distillforge {

/// Rows with norm below this are treated as zero rows.
inline constexpr double kZeroNormThreshold = 1e-30;

/// Scale every row to unit Euclidean norm. Throws ZeroNormRow.
Matrix normalize_rows(const Matrix& m);

/// Row norms of `m`, throwing ZeroNormRow on any row below the threshold.
std::vector<double> row_norms(const Matrix& m);

/// Pull an upstream gradient through y = v / |v| row-wise:
/// dv = (I - y yᵀ) g / |v|. `normalized` holds the forward outputs y.
Matrix normalize_rows_backward(const Matrix& normalized, std::span<const double> norms,
                               const Matrix& upstream);

/// M·Mᵀ
Matrix gram(const Matrix& m);

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
/// Throws NonFiniteEvaluation when a probe is NaN/Inf.
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h);

/// max_i |a_i - b_i| / max(max|a|, max|b|, 1e-12). Scale-aware relative error
/// used by every gradient check in the project.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Haar-ish random orthogonal matrix via modified Gram-Schmidt on a Gaussian draw.
Matrix random_orthogonal(std::size_t d, Rng& rng);

/// Gaussian matrix with the given standard deviation.
Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

}  // namespace distillforge

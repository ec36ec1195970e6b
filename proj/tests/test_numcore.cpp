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

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "distillforge/errors.hpp"
#include "distillforge/losses.hpp"
#include "distillforge/numcore.hpp"

using namespace distillforge;

TEST_CASE("normalize_rows scales rows to unit norm") {
  const auto out = normalize_rows(Matrix{{3.0, 4.0}});
  CHECK(out(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(out(0, 1) == doctest::Approx(0.8).epsilon(1e-15));

  const Matrix id{{1.0, 0.0}, {0.0, 1.0}};
  CHECK(normalize_rows(id) == id);
}

TEST_CASE("normalize_rows rejects zero rows with the row index") {
  try {
    normalize_rows(Matrix{{1.0, 1.0}, {0.0, 0.0}});
    FAIL("expected ZeroNormRow");
  } catch (const ZeroNormRow& e) {
    CHECK(e.row() == 1);
  }
  CHECK_THROWS_AS(normalize_rows(Matrix{{0.0, 0.0}}), ZeroNormRow);
  CHECK_THROWS_AS(normalize_rows(Matrix{{1e-31, 0.0}}), ZeroNormRow);
}

TEST_CASE("normalize_rows lets NaN rows through") {
  const Matrix out = normalize_rows(Matrix{{NAN, 1.0}, {3.0, 4.0}});
  CHECK(std::isnan(out(0, 0)));
  CHECK(std::isnan(out(0, 1)));
  CHECK(out(1, 1) == doctest::Approx(0.8));
}

TEST_CASE("normalize_rows is idempotent and preserves direction") {
  Rng rng(3, streams::kTest);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_normal(5, 7, 3.0, rng);
    const Matrix once = normalize_rows(m);
    const Matrix twice = normalize_rows(once);
    CHECK(max_abs(twice - once) <= 1e-12);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      CHECK(std::abs(norm(once.row(r)) - 1.0) <= 1e-12);
      // same direction: cosine with the original row is 1
      CHECK(dot(once.row(r), m.row(r)) / norm(m.row(r)) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("gram examples") {
  const Matrix id{{1.0, 0.0}, {0.0, 1.0}};
  CHECK(gram(id) == id);
  const Matrix dup{{1.0, 0.0}, {1.0, 0.0}};
  CHECK(gram(dup) == Matrix{{1.0, 1.0}, {1.0, 1.0}});
}

TEST_CASE("gram matches the scalar-loop oracle, is symmetric, unit diagonal on unit rows") {
  Rng rng(11, streams::kTest);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix m = random_normal(4, 3, 1.0, rng);
    const Matrix g = gram(m);
    const Matrix ref = oracle::gram(m);
    CHECK(max_abs(g - ref) <= 1e-15);
    CHECK(max_abs(g - transpose(g)) <= 1e-12);
    const Matrix gu = gram(normalize_rows(m));
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(gu(i, i) - 1.0) <= 1e-12);
  }
}

TEST_CASE("gram is invariant under right rotation") {
  Rng rng(5, streams::kTest);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix m = random_normal(6, 5, 1.0, rng);
    const Matrix q = random_orthogonal(5, rng);
    CHECK(max_abs(gram(matmul(m, q)) - gram(m)) <= 1e-10);
  }
}

TEST_CASE("finite_diff_grad on low-degree polynomials") {
  const double x0[] = {3.0};
  const auto g = finite_diff_grad([](std::span<const double> x) { return x[0] * x[0]; }, x0, 1e-5);
  CHECK(std::abs(g[0] - 6.0) <= 1e-9);

  const double xy[] = {2.0, 5.0};
  const auto g2 = finite_diff_grad([](std::span<const double> x) { return x[0] * x[1]; }, xy, 1e-5);
  CHECK(std::abs(g2[0] - 5.0) <= 1e-9);
  CHECK(std::abs(g2[1] - 2.0) <= 1e-9);

  // generic quadratic 0.5 xᵀAx + bᵀx with A symmetric
  const double pt[] = {0.3, -1.2, 2.0};
  const double h = 1e-4;
  const auto gq = finite_diff_grad(
      [](std::span<const double> x) {
        return 0.5 * (2 * x[0] * x[0] + 3 * x[1] * x[1] + x[2] * x[2]) + x[0] * x[1] - 4 * x[2] + 1;
      },
      pt, h);
  CHECK(std::abs(gq[0] - (2 * 0.3 + -1.2)) <= 10 * h * h);
  CHECK(std::abs(gq[1] - (3 * -1.2 + 0.3)) <= 10 * h * h);
  CHECK(std::abs(gq[2] - (2.0 - 4)) <= 10 * h * h);
}

TEST_CASE("finite_diff_grad reports non-finite probes") {
  const double x0[] = {0.0};
  CHECK_THROWS_AS(finite_diff_grad([](std::span<const double> x) { return 1.0 / (x[0] * 0.0); }, x0, 1e-5),
                  NonFiniteEvaluation);
  CHECK_THROWS(finite_diff_grad([](std::span<const double>) { return 0.0; }, x0, 0.0));
}

TEST_CASE("finite_diff_grad agrees with the analytic cosine gradient") {
  Rng rng(17, streams::kTest);
  const Matrix s = oracle::random_unit_rows(3, 4, rng);
  const Matrix t = oracle::random_unit_rows(3, 4, rng);
  const auto numeric = finite_diff_grad(
      [&](std::span<const double> x) { return cosine_loss(oracle::unflat(3, 4, x), t).value; },
      oracle::flat(s), 1e-6);
  const auto analytic = cosine_loss(s, t).grad;
  CHECK(max_relative_error(analytic.data(), numeric) < 1e-6);
}

TEST_CASE("random_orthogonal") {
  Rng rng(42, 0);
  const Matrix q1 = random_orthogonal(1, rng);
  CHECK(std::abs(std::abs(q1(0, 0)) - 1.0) <= 1e-15);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r(seed, 0);
    const Matrix q = random_orthogonal(3, r);
    CHECK(max_abs(matmul_tn(q, q) - Matrix::identity(3)) <= 1e-10);
  }

  Rng a(42, 0), b(42, 0);
  CHECK(random_orthogonal(2, a) == random_orthogonal(2, b));
  CHECK_THROWS(random_orthogonal(0, a));
}

TEST_CASE("Rng streams are reproducible and independent") {
  Rng a(1, 2), b(1, 2), c(1, 3);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs = differs || x != c.next_u64();
  }
  CHECK(differs);
  // Counter-based: restarting at a stored counter replays the stream.
  Rng d(9, 9);
  for (int i = 0; i < 17; ++i) d.next_u64();
  Rng e(9, 9, d.counter());
  CHECK(d.next_u64() == e.next_u64());

  Rng u(5, 5);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK((x >= 0.0 && x < 1.0));
    CHECK(u.uniform_int(7) < 7);
  }
}

TEST_CASE("matrix helpers validate shapes") {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  CHECK(matmul(a, transpose(a)) == matmul_nt(a, a));
  CHECK(matmul_tn(a, a) == matmul(transpose(a), a));
  CHECK_THROWS_AS(matmul(a, a), DimMismatch);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeMismatch);
  CHECK_THROWS_AS(Matrix({{1, 2}, {3}}), ShapeMismatch);
  const Matrix blocks[] = {a, a};
  CHECK(hconcat(blocks).cols() == 6);
  CHECK(vconcat(blocks).rows() == 4);
  const std::size_t idx[] = {1, 0};
  CHECK(gather_rows(a, idx) == Matrix{{4, 5, 6}, {1, 2, 3}});
}

TEST_CASE("normalize_rows_backward matches finite differences") {
  Rng rng(23, streams::kTest);
  const Matrix v = random_normal(3, 4, 2.0, rng);
  const Matrix w = random_normal(3, 4, 1.0, rng);  // f(v) = Σ w ⊙ normalize(v)
  auto f = [&](std::span<const double> x) {
    const Matrix y = normalize_rows(oracle::unflat(3, 4, x));
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w.data()[i] * y.data()[i];
    return s;
  };
  const auto numeric = finite_diff_grad(f, oracle::flat(v), 1e-6);
  const auto analytic = normalize_rows_backward(normalize_rows(v), row_norms(v), w);
  CHECK(max_relative_error(analytic.data(), numeric) < 1e-7);
}

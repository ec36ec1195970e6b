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
#include "distillforge/evalkit.hpp"
#include "distillforge/losses.hpp"
#include "distillforge/numcore.hpp"
#include "distillforge/synthetic.hpp"

using namespace distillforge;

TEST_CASE("alignment of a matrix with itself") {
  Rng rng(1, streams::kTest);
  const Matrix s = oracle::random_unit_rows(10, 6, rng);
  const auto a = head_alignment(Head::kFc1, s, s);
  REQUIRE(a.mean_cosine.has_value());
  CHECK(std::abs(*a.mean_cosine - 1.0) <= 1e-12);
  CHECK(a.sim_mse <= 1e-12);
  CHECK(std::abs(a.spearman - 1.0) <= 1e-12);
}

TEST_CASE("rotation separates mean cosine from the pairwise metrics") {
  Rng rng(2, streams::kTest);
  const Matrix t = oracle::random_unit_rows(12, 5, rng);
  const Matrix s = matmul(t, random_orthogonal(5, rng));
  const auto a = head_alignment(Head::kFc1, s, t);
  CHECK(*a.mean_cosine < 0.999);
  CHECK(a.sim_mse <= 1e-12);
  CHECK(std::abs(a.spearman - 1.0) <= 1e-12);
}

TEST_CASE("sim_mse equals sim_loss and mean cosine needs equal widths") {
  Rng rng(3, streams::kTest);
  const Matrix s = oracle::random_unit_rows(8, 4, rng);
  const Matrix t = oracle::random_unit_rows(8, 7, rng);
  const auto a = head_alignment(Head::kFc3, s, t);
  CHECK(a.sim_mse == sim_loss(s, t).value);
  CHECK_FALSE(a.mean_cosine.has_value());
  CHECK(a.dim == 4);
  CHECK_THROWS_AS(head_alignment(Head::kFc1, s, Matrix(7, 4)), BatchMismatch);
}

TEST_CASE("spearman of independent random embeddings is small") {
  Rng rng(4, streams::kTest);
  int small = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = oracle::random_unit_rows(50, 8, rng);
    const Matrix t = oracle::random_unit_rows(50, 8, rng);
    if (std::abs(head_alignment(Head::kFc1, s, t).spearman) < 0.3) ++small;
  }
  CHECK(small == 20);
}

TEST_CASE("average ranks and spearman by hand") {
  const double v[] = {10, 20, 20, 5};
  CHECK(average_ranks(v) == std::vector<double>{2, 3.5, 3.5, 1});
  const double a[] = {1, 2, 3, 4};
  const double b[] = {4, 3, 2, 1};
  CHECK(std::abs(spearman(a, b) + 1.0) <= 1e-12);
  const double flat[] = {1, 1, 1, 1};
  CHECK(spearman(a, flat) == 0.0);
  // Textbook example: ranks (1,2,3,4,5) vs (2,1,4,3,5) → 1 - 6·4/(5·24) = 0.8
  const double x[] = {1, 2, 3, 4, 5};
  const double y[] = {2, 1, 4, 3, 5};
  CHECK(std::abs(spearman(x, y) - 0.8) <= 1e-12);
}

TEST_CASE("retrieval examples") {
  const Matrix docs = Matrix::identity(12);
  const auto perfect = retrieval_eval(docs, docs, std::vector<std::size_t>(
                                                      {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}));
  CHECK(perfect.recall_at_1 == 1.0);
  CHECK(perfect.mrr == 1.0);

  // Relevant doc always second: query i scores doc (i+1)%n highest.
  const std::size_t n = 6;
  Matrix queries(n, n);
  std::vector<std::size_t> qrels(n);
  for (std::size_t i = 0; i < n; ++i) {
    queries(i, (i + 1) % n) = 1.0;
    queries(i, i) = 0.5;
    qrels[i] = i;
  }
  const auto second = retrieval_eval(queries, Matrix::identity(n), qrels);
  CHECK(second.recall_at_1 == 0.0);
  CHECK(second.recall_at_5 == 1.0);
  CHECK(second.mrr == 0.5);

  std::map<std::size_t, std::size_t> partial{{0, 0}};
  CHECK_THROWS_AS(retrieval_eval(queries, Matrix::identity(n), partial), MissingQrel);
}

TEST_CASE("vectorized ranking matches the scalar oracle") {
  Rng rng(5, streams::kTest);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix q = oracle::random_unit_rows(20, 6, rng);
    Matrix d = oracle::random_unit_rows(30, 6, rng);
    if (trial % 2 == 0) {
      for (std::size_t c = 0; c < 6; ++c) d(7, c) = d(3, c);  // exact ties
    }
    std::vector<std::size_t> qrels(20);
    for (auto& r : qrels) r = rng.uniform_int(30);
    double r1 = 0, r5 = 0, r10 = 0, mrr = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      const auto order = rank_documents(q.row(i), d);
      const std::size_t rank = oracle::rank_of(q, i, d, qrels[i]);
      CHECK(order[rank - 1] == qrels[i]);
      r1 += rank <= 1;
      r5 += rank <= 5;
      r10 += rank <= 10;
      mrr += 1.0 / static_cast<double>(rank);
    }
    const auto rep = retrieval_eval(q, d, qrels);
    CHECK(rep.recall_at_1 == doctest::Approx(r1 / 20).epsilon(1e-15));
    CHECK(rep.recall_at_5 == doctest::Approx(r5 / 20).epsilon(1e-15));
    CHECK(rep.recall_at_10 == doctest::Approx(r10 / 20).epsilon(1e-15));
    CHECK(rep.mrr == doctest::Approx(mrr / 20).epsilon(1e-12));
    CHECK(rep.recall_at_1 <= rep.recall_at_5);
    CHECK(rep.recall_at_5 <= rep.recall_at_10);
  }
}

TEST_CASE("dimension sweep rows") {
  const SyntheticWorld world{SyntheticSpec{}};
  const auto eval = world.text_dataset(64, 1);
  const auto retrieval = world.retrieval_set(40, 4);
  const auto net = StudentNet::init(ModelConfig{}, 3);
  const auto rows = dimension_sweep(net, eval.base, eval.teacher.matrix, &retrieval);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].alignment.head == Head::kFc1);
  for (const auto& r : rows) {
    CHECK(r.alignment.dim <= rows[0].alignment.dim);
    CHECK(r.retrieval.has_value());
  }
  CHECK(rows[0].alignment.mean_cosine.has_value());
  CHECK_FALSE(rows[2].alignment.mean_cosine.has_value());

  const auto header = sweep_csv_header();
  CHECK(header == "head,dim,mean_cosine,sim_mse,spearman,recall_at_1,recall_at_5,recall_at_10,mrr");
  for (const auto& r : rows) {
    const auto line = sweep_csv_row(r);
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
  }
  CHECK(sweep_csv_row(rows[0]).rfind("fc1,40,", 0) == 0);
}

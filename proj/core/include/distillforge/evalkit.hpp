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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distillforge/matrix.hpp"
#include "distillforge/model.hpp"
#include "distillforge/synthetic.hpp"

namespace distillforge {

struct HeadAlignment {
  Head head = Head::kFc1;
  std::size_t dim = 0;
  /// Mean of s_x·t_x; only defined when the head width equals the teacher's.
  std::optional<double> mean_cosine;
  /// Same value as sim_loss on the same inputs.
  double sim_mse = 0.0;
  /// Rank correlation between student and teacher pair similarities.
  double spearman = 0.0;
};

struct AlignmentReport {
  std::vector<HeadAlignment> heads;

  const HeadAlignment& at(Head h) const;
};

AlignmentReport alignment(const std::map<Head, Matrix>& student_heads, const Matrix& teacher);
HeadAlignment head_alignment(Head head, const Matrix& student, const Matrix& teacher);

/// 1-based ranks; tied values share the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Returns 0 when either side has no
/// rank variance.
double spearman(std::span<const double> a, std::span<const double> b);

/// Upper-triangle (i < j) pair similarities of a unit-row matrix, in
/// enumerate_pairs order.
std::vector<double> pair_similarities(const Matrix& m);

struct RetrievalReport {
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double recall_at_10 = 0.0;
  double mrr = 0.0;
};

/// Document order for one query: dot product descending, ties by index ascending.
std::vector<std::size_t> rank_documents(std::span<const double> query, const Matrix& docs);

/// One relevant document per query. Throws MissingQrel when a query has none.
RetrievalReport retrieval_eval(const Matrix& queries, const Matrix& docs,
                               const std::map<std::size_t, std::size_t>& qrels);
RetrievalReport retrieval_eval(const Matrix& queries, const Matrix& docs,
                               std::span<const std::size_t> qrels);

struct SweepRow {
  HeadAlignment alignment;
  std::optional<RetrievalReport> retrieval;
};

/// One row per head, FC1 first.
std::vector<SweepRow> dimension_sweep(const StudentNet& net, const Matrix& eval_base,
                                      const Matrix& teacher, const RetrievalSet* retrieval);

/// head,dim,mean_cosine,sim_mse,spearman,recall_at_1,recall_at_5,recall_at_10,mrr
std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& row);

}  // namespace distillforge

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

#include "distillforge/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "distillforge/errors.hpp"
#include "distillforge/losses.hpp"

namespace distillforge {

const HeadAlignment& AlignmentReport::at(Head h) const {
  for (const auto& a : heads)
    if (a.head == h) return a;
  throw ConfigError("no alignment row for head " + std::string(to_string(h)));
}

std::vector<double> pair_similarities(const Matrix& m) {
  std::vector<double> sims;
  sims.reserve(m.rows() < 2 ? 0 : m.rows() * (m.rows() - 1) / 2);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.rows(); ++j) sims.push_back(dot(m.row(i), m.row(j)));
  return sims;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t g = 0; g < order.size();) {
    std::size_t e = g;
    while (e < order.size() && values[order[e]] == values[order[g]]) ++e;
    const double avg = 0.5 * static_cast<double>(g + 1 + e);  // mean of positions g+1..e
    for (std::size_t k = g; k < e; ++k) ranks[order[k]] = avg;
    g = e;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("spearman: lengths differ");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

HeadAlignment head_alignment(Head head, const Matrix& student, const Matrix& teacher) {
  if (student.rows() != teacher.rows()) throw BatchMismatch("alignment: student and teacher batch sizes differ");
  HeadAlignment a;
  a.head = head;
  a.dim = student.cols();
  if (student.cols() == teacher.cols() && student.rows() > 0) {
    double s = 0.0;
    for (std::size_t r = 0; r < student.rows(); ++r) s += dot(student.row(r), teacher.row(r));
    a.mean_cosine = std::clamp(s / static_cast<double>(student.rows()), -1.0, 1.0);
  }
  a.sim_mse = sim_loss(student, teacher).value;
  a.spearman = spearman(pair_similarities(student), pair_similarities(teacher));
  return a;
}

AlignmentReport alignment(const std::map<Head, Matrix>& student_heads, const Matrix& teacher) {
  AlignmentReport rep;
  for (const auto& [head, s] : student_heads) rep.heads.push_back(head_alignment(head, s, teacher));
  return rep;
}

std::vector<std::size_t> rank_documents(std::span<const double> query, const Matrix& docs) {
  if (query.size() != docs.cols()) throw DimMismatch("rank_documents: query and doc widths differ");
  std::vector<double> scores(docs.rows());
  for (std::size_t d = 0; d < docs.rows(); ++d) scores[d] = dot(query, docs.row(d));
  std::vector<std::size_t> order(docs.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  return order;
}

RetrievalReport retrieval_eval(const Matrix& queries, const Matrix& docs,
                               const std::map<std::size_t, std::size_t>& qrels) {
  RetrievalReport rep;
  const std::size_t nq = queries.rows();
  if (nq == 0) return rep;
  for (std::size_t q = 0; q < nq; ++q) {
    const auto it = qrels.find(q);
    if (it == qrels.end()) throw MissingQrel("query " + std::to_string(q) + " has no relevant document");
    if (it->second >= docs.rows())
      throw MissingQrel("query " + std::to_string(q) + " points at missing document " + std::to_string(it->second));
    const auto order = rank_documents(queries.row(q), docs);
    const auto pos = static_cast<std::size_t>(std::ranges::find(order, it->second) - order.begin()) + 1;
    rep.recall_at_1 += pos <= 1 ? 1.0 : 0.0;
    rep.recall_at_5 += pos <= 5 ? 1.0 : 0.0;
    rep.recall_at_10 += pos <= 10 ? 1.0 : 0.0;
    rep.mrr += 1.0 / static_cast<double>(pos);
  }
  const double n = static_cast<double>(nq);
  rep.recall_at_1 /= n;
  rep.recall_at_5 /= n;
  rep.recall_at_10 /= n;
  rep.mrr /= n;
  return rep;
}

RetrievalReport retrieval_eval(const Matrix& queries, const Matrix& docs,
                               std::span<const std::size_t> qrels) {
  std::map<std::size_t, std::size_t> m;
  for (std::size_t q = 0; q < qrels.size(); ++q) m.emplace(q, qrels[q]);
  return retrieval_eval(queries, docs, m);
}

std::vector<SweepRow> dimension_sweep(const StudentNet& net, const Matrix& eval_base,
                                      const Matrix& teacher, const RetrievalSet* retrieval) {
  const HeadSet heads(kAllHeads.begin(), kAllHeads.end());
  const auto outs = embed_text(net, eval_base, heads);
  std::map<Head, Matrix> q_outs, d_outs;
  if (retrieval != nullptr) {
    q_outs = embed_text(net, retrieval->query_base, heads);
    d_outs = embed_text(net, retrieval->doc_base, heads);
  }
  std::vector<SweepRow> rows;
  for (auto h : heads) {
    SweepRow row;
    row.alignment = head_alignment(h, outs.at(h), teacher);
    if (retrieval != nullptr) row.retrieval = retrieval_eval(q_outs.at(h), d_outs.at(h), retrieval->qrels);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv_header() {
  return "head,dim,mean_cosine,sim_mse,spearman,recall_at_1,recall_at_5,recall_at_10,mrr";
}

std::string sweep_csv_row(const SweepRow& row) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  const auto& a = row.alignment;
  std::string s = std::string(to_string(a.head)) + "," + std::to_string(a.dim) + ",";
  s += a.mean_cosine ? num(*a.mean_cosine) : "";
  s += "," + num(a.sim_mse) + "," + num(a.spearman);
  if (row.retrieval) {
    const auto& r = *row.retrieval;
    s += "," + num(r.recall_at_1) + "," + num(r.recall_at_5) + "," + num(r.recall_at_10) + "," + num(r.mrr);
  } else {
    s += ",,,,";
  }
  return s;
}

}  // namespace distillforge

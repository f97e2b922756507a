// Copyright 2026 The vdistill Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vdistill/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vdistill/error.hpp"

namespace vdistill {
namespace {

void check_same_dim(const EmbeddingVector& a, const EmbeddingVector& b, const char* what) {
  if (a.dim() != b.dim()) {
    fail(ErrorKind::kDimension, std::string(what) + ": embedding dims differ (" +
                                    std::to_string(a.dim()) + " vs " +
                                    std::to_string(b.dim()) + ")");
  }
}

double checked_norm(const EmbeddingVector& v) {
  const double n = l2_norm(v.view());
  if (!(n > 0.0)) {
    fail(ErrorKind::kDegenerate, "degenerate embedding: zero norm has no direction");
  }
  return n;
}

double max_of(std::span<const double> v) { return *std::max_element(v.begin(), v.end()); }

// log sum exp(v), shifted by max(v).
double log_sum_exp(std::span<const double> v) {
  const double m = max_of(v);
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

std::vector<double> softmax(std::span<const double> v, double scale) {
  std::vector<double> out(v.size());
  double m = v[0] * scale;
  for (double x : v) m = std::max(m, x * scale);
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] * scale - m);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

void check_positives(std::size_t k, std::span<const std::size_t> positives) {
  require(k >= 1, ErrorKind::kContract, "similarity row must have at least one candidate");
  require(!positives.empty(), ErrorKind::kContract, "InfoNCE needs at least one positive");
  for (std::size_t p : positives) {
    require(p < k, ErrorKind::kContract,
            "positive index " + std::to_string(p) + " outside [0, " + std::to_string(k) + ")");
  }
}

// The floor never lifts a student probability above the teacher's, so
// entries where both are tiny and equal still contribute exactly 0.
double floored(double t, double s) {
  return s >= kStudentProbFloor ? s : std::max(s, std::min(t, kStudentProbFloor));
}

bool is_floored(double t, double s) { return s < std::min(t, kStudentProbFloor); }

// d KL(t || s) / d z where s = softmax(z), honoring the probability floor:
// floored entries contribute a constant log term. Written as
// s_k - t_k - s_k * (floored teacher mass) so that t == s gives exact zeros.
std::vector<double> kl_grad_logits(const std::vector<double>& t, const std::vector<double>& s) {
  double clamped_mass = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (is_floored(t[j], s[j])) clamped_mass += t[j];
  }
  std::vector<double> g(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double own = is_floored(t[k], s[k]) ? 0.0 : t[k];
    g[k] = (s[k] - own) - s[k] * clamped_mass;
  }
  return g;
}

double kl_raw(const std::vector<double>& t, const std::vector<double>& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] > 0.0) acc += t[i] * std::log(t[i] / floored(t[i], s[i]));
  }
  return acc;
}

std::vector<double> unit(const EmbeddingVector& v) {
  const double n = checked_norm(v);
  std::vector<double> u(v.values);
  for (double& x : u) x /= n;
  return u;
}

// Per-instance alignment term and, optionally, its gradient w.r.t. the
// student query and doc.
struct AlignTerm {
  double value = 0.0;
  std::vector<double> d_query;
  std::vector<double> d_doc;
};

AlignTerm align_term(const EmbeddingVector& tq, const EmbeddingVector& sq,
                     const EmbeddingVector& td, const EmbeddingVector& sd, bool normalized) {
  AlignTerm term;
  auto one = [&](const EmbeddingVector& t, const EmbeddingVector& s, std::vector<double>& grad) {
    if (!normalized) {
      grad.resize(s.dim());
      for (std::size_t k = 0; k < s.dim(); ++k) grad[k] = 2.0 * (s[k] - t[k]);
      return squared_distance(t.view(), s.view());
    }
    const std::vector<double> v = unit(t);
    const std::vector<double> u = unit(s);
    const double ns = checked_norm(s);
    // d/ds |v - u|^2 = (I - u u^T) 2 (u - v) / |s|
    std::vector<double> r(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) r[k] = 2.0 * (u[k] - v[k]);
    const double ur = dot(u, r);
    grad.resize(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) grad[k] = (r[k] - u[k] * ur) / ns;
    return squared_distance(v, u);
  };
  term.value = one(td, sd, term.d_doc) + one(tq, sq, term.d_query);
  return term;
}

void validate_batch(const DistillBatch& b) {
  const std::size_t n = b.student_queries.size();
  require(n >= 1, ErrorKind::kContract, "distillation batch is empty");
  require(b.teacher_queries.size() == n && b.teacher_docs.size() == n &&
              b.student_docs.size() == n,
          ErrorKind::kContract,
          "distillation batch lists must share one length n (teacher/student queries/docs)");
  const std::size_t dim = b.student_queries[0].dim();
  for (const auto* list : {&b.teacher_queries, &b.teacher_docs, &b.student_queries,
                           &b.student_docs}) {
    for (const EmbeddingVector& e : *list) {
      require(e.dim() == dim, ErrorKind::kDimension,
              "distillation batch embeddings must share one dimension");
    }
  }
}

void validate_options(const DistillOptions& o) {
  require(o.tau_soft > 0.0 && std::isfinite(o.tau_soft), ErrorKind::kConfig,
          "tau_soft must be positive");
  require(o.tau_weight > 0.0 && std::isfinite(o.tau_weight), ErrorKind::kConfig,
          "tau_weight must be positive");
}

// Everything the total and its gradient share.
struct DistillForward {
  std::vector<SimilarityRow> teacher_rows;
  std::vector<SimilarityRow> student_rows;
  std::vector<std::vector<double>> t_probs;
  std::vector<std::vector<double>> s_probs;
  std::vector<AlignTerm> align;
  std::vector<double> kl;
  LossBreakdown breakdown;
};

DistillForward distill_forward(const DistillBatch& b, const DistillOptions& o) {
  validate_batch(b);
  validate_options(o);
  const std::size_t n = b.student_queries.size();
  DistillForward f;
  f.teacher_rows = similarity_matrix(b.teacher_queries, b.teacher_docs);
  f.student_rows = similarity_matrix(b.student_queries, b.student_docs);
  f.kl.resize(n);
  double align_sum = 0.0;
  double soft_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    f.t_probs.push_back(softmax(f.teacher_rows[i].values, 1.0 / o.tau_soft));
    f.s_probs.push_back(softmax(f.student_rows[i].values, 1.0 / o.tau_soft));
    f.kl[i] = kl_raw(f.t_probs[i], f.s_probs[i]);
    f.align.push_back(align_term(b.teacher_queries[i], b.student_queries[i], b.teacher_docs[i],
                                 b.student_docs[i], o.align_normalized));
    align_sum += f.align[i].value;
    soft_sum += f.kl[i];
  }
  LossBreakdown& out = f.breakdown;
  out.align = align_sum / static_cast<double>(n);
  out.soft = soft_sum / static_cast<double>(n);
  double hard_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos[] = {i};
    hard_sum += infonce_loss(f.student_rows[i], pos);
  }
  out.hard = hard_sum / static_cast<double>(n);
  out.weights = o.use_reweight ? adaptive_weights(f.kl, o.tau_weight)
                               : std::vector<double>(n, 1.0 / static_cast<double>(n));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double term = 0.0;
    if (o.use_align) term += f.align[i].value;
    if (o.use_soft) term += f.kl[i];
    total += out.weights[i] * term;
  }
  if (o.include_hard) total += out.hard;
  out.total = total;
  return f;
}

}  // namespace

double cosine_sim(const EmbeddingVector& q, const EmbeddingVector& d) {
  check_same_dim(q, d, "cosine_sim");
  const double nq = checked_norm(q);
  const double nd = checked_norm(d);
  const double c = dot(q.view(), d.view()) / (nq * nd);
  return std::clamp(c, -1.0, 1.0);
}

CosineGradient cosine_sim_grad(const EmbeddingVector& q, const EmbeddingVector& d) {
  check_same_dim(q, d, "cosine_sim");
  const double nq = checked_norm(q);
  const double nd = checked_norm(d);
  CosineGradient g;
  // Unclamped value so the gradient stays consistent with the formula.
  g.value = dot(q.view(), d.view()) / (nq * nd);
  g.d_query.resize(q.dim());
  g.d_doc.resize(d.dim());
  const double inv = 1.0 / (nq * nd);
  for (std::size_t k = 0; k < q.dim(); ++k) {
    g.d_query[k] = d[k] * inv - g.value * q[k] / (nq * nq);
    g.d_doc[k] = q[k] * inv - g.value * d[k] / (nd * nd);
  }
  return g;
}

std::vector<SimilarityRow> similarity_matrix(std::span<const EmbeddingVector> queries,
                                             std::span<const EmbeddingVector> docs) {
  std::vector<SimilarityRow> rows(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    rows[i].query_index = i;
    rows[i].values.reserve(docs.size());
    for (const EmbeddingVector& d : docs) rows[i].values.push_back(cosine_sim(queries[i], d));
  }
  return rows;
}

double infonce_loss(const SimilarityRow& row, std::span<const std::size_t> positives) {
  check_positives(row.values.size(), positives);
  const double lse = log_sum_exp(row.values);
  double loss = 0.0;
  for (std::size_t p : positives) loss -= row.values[p] - lse;
  return loss;
}

std::vector<double> infonce_grad(const SimilarityRow& row,
                                 std::span<const std::size_t> positives) {
  check_positives(row.values.size(), positives);
  std::vector<double> g = softmax(row.values, 1.0);
  const double count = static_cast<double>(positives.size());
  for (double& x : g) x *= count;
  for (std::size_t p : positives) g[p] -= 1.0;
  return g;
}

double align_loss(std::span<const EmbeddingVector> teacher_docs,
                  std::span<const EmbeddingVector> student_docs,
                  std::span<const EmbeddingVector> teacher_queries,
                  std::span<const EmbeddingVector> student_queries) {
  const std::size_t n = teacher_docs.size();
  require(n >= 1, ErrorKind::kContract, "align_loss needs at least one pair");
  require(student_docs.size() == n && teacher_queries.size() == n &&
              student_queries.size() == n,
          ErrorKind::kContract, "align_loss lists must have equal length");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    check_same_dim(teacher_docs[i], student_docs[i], "align_loss");
    check_same_dim(teacher_queries[i], student_queries[i], "align_loss");
    acc += squared_distance(teacher_docs[i].view(), student_docs[i].view()) +
           squared_distance(teacher_queries[i].view(), student_queries[i].view());
  }
  return acc / static_cast<double>(n);
}

SoftLabelDistribution soft_distribution(const SimilarityRow& row, double tau) {
  require(tau > 0.0 && std::isfinite(tau), ErrorKind::kConfig, "temperature must be positive");
  require(!row.values.empty(), ErrorKind::kContract, "similarity row is empty");
  return SoftLabelDistribution{softmax(row.values, 1.0 / tau), tau};
}

double kl_divergence(const SoftLabelDistribution& t, const SoftLabelDistribution& s) {
  require(t.probs.size() == s.probs.size(), ErrorKind::kContract,
          "KL divergence needs distributions of equal length");
  return kl_raw(t.probs, s.probs);
}

std::vector<double> adaptive_weights(std::span<const double> kl_values, double tau_weight) {
  require(!kl_values.empty(), ErrorKind::kContract, "adaptive_weights needs n >= 1");
  require(tau_weight > 0.0 && std::isfinite(tau_weight), ErrorKind::kContract,
          "tau_weight must be positive");
  for (double v : kl_values) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::kContract,
            "KL values must be finite and non-negative");
  }
  return softmax(kl_values, 1.0 / tau_weight);
}

LossBreakdown total_distill_loss(const DistillBatch& batch, const DistillOptions& options) {
  return distill_forward(batch, options).breakdown;
}

DistillGradients grad_total_distill_loss(const DistillBatch& batch,
                                         const DistillOptions& options) {
  const DistillForward f = distill_forward(batch, options);
  const std::size_t n = batch.student_queries.size();
  const std::size_t dim = batch.student_queries[0].dim();
  DistillGradients g;
  g.student_queries.assign(n, std::vector<double>(dim, 0.0));
  g.student_docs.assign(n, std::vector<double>(dim, 0.0));

  // d total / d student similarity S_ij
  Matrix d_sims(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = f.breakdown.weights[i];
    if (options.use_align) {
      for (std::size_t k = 0; k < dim; ++k) {
        g.student_queries[i][k] += w * f.align[i].d_query[k];
        g.student_docs[i][k] += w * f.align[i].d_doc[k];
      }
    }
    if (options.use_soft) {
      const std::vector<double> gz = kl_grad_logits(f.t_probs[i], f.s_probs[i]);
      for (std::size_t j = 0; j < n; ++j) d_sims(i, j) += w * gz[j] / options.tau_soft;
    }
    if (options.include_hard) {
      const std::size_t pos[] = {i};
      const std::vector<double> gh = infonce_grad(f.student_rows[i], pos);
      for (std::size_t j = 0; j < n; ++j) d_sims(i, j) += gh[j] / static_cast<double>(n);
    }
  }
  if (options.use_soft || options.include_hard) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double upstream = d_sims(i, j);
        if (upstream == 0.0) continue;
        const CosineGradient cg = cosine_sim_grad(batch.student_queries[i], batch.student_docs[j]);
        for (std::size_t k = 0; k < dim; ++k) {
          g.student_queries[i][k] += upstream * cg.d_query[k];
          g.student_docs[j][k] += upstream * cg.d_doc[k];
        }
      }
    }
  }
  return g;
}

InBatchLoss in_batch_infonce(std::span<const EmbeddingVector> queries,
                             std::span<const EmbeddingVector> docs) {
  const std::size_t n = queries.size();
  require(n >= 1 && docs.size() == n, ErrorKind::kContract,
          "in-batch InfoNCE needs equal, non-empty query and doc lists");
  const std::size_t dim = queries[0].dim();
  const auto rows = similarity_matrix(queries, docs);
  InBatchLoss out;
  out.d_queries.assign(n, std::vector<double>(dim, 0.0));
  out.d_docs.assign(n, std::vector<double>(dim, 0.0));
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos[] = {i};
    out.value += infonce_loss(rows[i], pos) * scale;
    const std::vector<double> gs = infonce_grad(rows[i], pos);
    for (std::size_t j = 0; j < n; ++j) {
      const CosineGradient cg = cosine_sim_grad(queries[i], docs[j]);
      for (std::size_t k = 0; k < dim; ++k) {
        out.d_queries[i][k] += scale * gs[j] * cg.d_query[k];
        out.d_docs[j][k] += scale * gs[j] * cg.d_doc[k];
      }
    }
  }
  return out;
}

}  // namespace vdistill

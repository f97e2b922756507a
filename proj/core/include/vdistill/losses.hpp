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

// Similarity and loss stack for contrastive training and teacher-to-student
// distillation: cosine similarity, InfoNCE over in-batch candidates,
// representation alignment, temperature soft labels, KL(teacher || student),
// KL-driven instance re-weighting, and the weighted distillation total.
// Every loss has an analytic gradient w.r.t. the student embeddings.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vdistill/encoder.hpp"

namespace vdistill {

/// Cosine scores of one query against K candidates.
struct SimilarityRow {
  std::vector<double> values;
  std::size_t query_index = 0;
};

/// Softmax of a similarity row at a temperature. Entries strictly positive.
struct SoftLabelDistribution {
  std::vector<double> probs;
  double temperature = 1.0;
};

struct LossBreakdown {
  double hard = 0.0;   // mean in-batch InfoNCE of the student
  double align = 0.0;  // (1/n) sum_i align_i
  double soft = 0.0;   // (1/n) sum_i KL_i
  std::vector<double> weights;
  double total = 0.0;
};

/// Clamp applied to student probabilities inside the KL log.
inline constexpr double kStudentProbFloor = 1e-12;

/// q.d / (|q| |d|). Throws kDegenerate on a zero-norm input.
double cosine_sim(const EmbeddingVector& q, const EmbeddingVector& d);

struct CosineGradient {
  double value = 0.0;
  std::vector<double> d_query;
  std::vector<double> d_doc;
};
CosineGradient cosine_sim_grad(const EmbeddingVector& q, const EmbeddingVector& d);

/// rows[i].values[j] = cosine_sim(queries[i], docs[j]).
std::vector<SimilarityRow> similarity_matrix(std::span<const EmbeddingVector> queries,
                                             std::span<const EmbeddingVector> docs);

/// -sum_{p in positives} log softmax(sim)[p], via max-shifted log-sum-exp.
double infonce_loss(const SimilarityRow& row, std::span<const std::size_t> positives);

/// d infonce_loss / d row.values.
std::vector<double> infonce_grad(const SimilarityRow& row,
                                 std::span<const std::size_t> positives);

/// (1/n) sum_i (|d_t,i - d_s,i|^2 + |q_t,i - q_s,i|^2) on raw embeddings.
double align_loss(std::span<const EmbeddingVector> teacher_docs,
                  std::span<const EmbeddingVector> student_docs,
                  std::span<const EmbeddingVector> teacher_queries,
                  std::span<const EmbeddingVector> student_queries);

SoftLabelDistribution soft_distribution(const SimilarityRow& row, double tau);

/// sum_i t_i ln(t_i / s'_i) where s'_i = s_i when s_i >= 1e-12 and
/// max(s_i, min(t_i, 1e-12)) below it; terms with t_i = 0 contribute 0.
double kl_divergence(const SoftLabelDistribution& t, const SoftLabelDistribution& s);

/// softmax(kl / tau_weight). The result is used as a constant downstream.
std::vector<double> adaptive_weights(std::span<const double> kl_values, double tau_weight);

/// One in-batch training instance set: query i is paired with doc i and the
/// batch documents are the candidate set for every query (K = n).
struct DistillBatch {
  std::vector<EmbeddingVector> teacher_queries;
  std::vector<EmbeddingVector> teacher_docs;
  std::vector<EmbeddingVector> student_queries;
  std::vector<EmbeddingVector> student_docs;
};

struct DistillOptions {
  double tau_soft = 1.0;
  double tau_weight = 1.0;
  bool use_align = true;
  bool use_soft = true;
  /// When false, weights are uniform 1/n.
  bool use_reweight = true;
  /// Align L2-normalized embeddings instead of raw ones.
  bool align_normalized = false;
  /// Adds the student's mean in-batch InfoNCE to the total.
  bool include_hard = false;
};

/// total = sum_i w_i (align_i + soft_i) with w = adaptive_weights(KL_i).
LossBreakdown total_distill_loss(const DistillBatch& batch, const DistillOptions& options);

/// Gradients of the total w.r.t. student embeddings only; the teacher is
/// frozen so no teacher gradient exists. Weights are held constant.
struct DistillGradients {
  std::vector<std::vector<double>> student_queries;
  std::vector<std::vector<double>> student_docs;
};

DistillGradients grad_total_distill_loss(const DistillBatch& batch,
                                         const DistillOptions& options);

/// Mean over queries of InfoNCE with doc i as the positive of query i, and
/// its gradients w.r.t. every query and doc embedding.
struct InBatchLoss {
  double value = 0.0;
  std::vector<std::vector<double>> d_queries;
  std::vector<std::vector<double>> d_docs;
};

InBatchLoss in_batch_infonce(std::span<const EmbeddingVector> queries,
                             std::span<const EmbeddingVector> docs);

}  // namespace vdistill

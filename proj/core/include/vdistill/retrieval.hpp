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

// Exact cosine top-k retrieval, score interpolation, run files and
// Recall@k / MRR@k evaluation.
//
// Ranking order everywhere: score descending, then doc_id ascending. Since
// doc ids are unique this is a total order, so results do not depend on how
// the corpus scan is split across workers.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vdistill/encoder.hpp"
#include "vdistill/linalg.hpp"

namespace vdistill {

struct CorpusIndex {
  std::vector<std::string> doc_ids;
  Matrix embeddings;  // num_docs x embedding_dim
  std::vector<double> norms;

  std::size_t size() const { return doc_ids.size(); }
  std::size_t dim() const { return embeddings.cols; }
};

/// Which document encoder view builds the index.
enum class EncoderMode { kStudent, kTeacher };

std::string to_string(EncoderMode mode);
EncoderMode encoder_mode_from_string(const std::string& name);

/// Wraps precomputed embeddings. Throws kData on an empty corpus or duplicate
/// ids, kDegenerate on a zero-norm row.
CorpusIndex make_index(std::vector<std::string> doc_ids, Matrix embeddings);

/// Encodes every document with the selected view. In teacher mode every
/// document needs text_features; the error lists all offending ids.
CorpusIndex build_index(std::span<const FeatureRecord> docs, EncoderMode mode,
                        const EncoderParams& doc_encoder);

struct RunEntry {
  std::string query_id;
  std::string doc_id;
  std::size_t rank = 0;  // 1-based
  double score = 0.0;
  std::string tag;

  bool operator==(const RunEntry&) const = default;
};

/// Cosine score of the query against every indexed document, in index order.
std::vector<double> score_all(const CorpusIndex& index, const EmbeddingVector& query,
                              std::size_t workers = 1);

/// Exact cosine top-k. The corpus scan is split into `workers` contiguous
/// chunks whose partial top-k lists are merged in chunk order.
std::vector<RunEntry> search_topk(const CorpusIndex& index, const EmbeddingVector& query,
                                  std::size_t k, std::string_view query_id = "q",
                                  std::string_view tag = "run", std::size_t workers = 1);

/// Top-k of per-document scores given in index order.
std::vector<RunEntry> topk_from_scores(std::span<const std::string> doc_ids,
                                       std::span<const double> scores, std::size_t k,
                                       std::string_view query_id, std::string_view tag,
                                       std::size_t workers = 1);

inline constexpr double kDefaultHybridAlpha = 0.5;

/// alpha * score_a + (1 - alpha) * score_b per document, then top-k.
/// Throws kConfig unless alpha is in [0, 1].
std::vector<RunEntry> hybrid_interpolate(std::span<const std::string> doc_ids,
                                         std::span<const double> scores_a,
                                         std::span<const double> scores_b, double alpha,
                                         std::size_t k, std::string_view query_id,
                                         std::string_view tag);

enum class JudgeMode { kGoldIds, kAnswerStrings };

std::string to_string(JudgeMode mode);
JudgeMode judge_mode_from_string(const std::string& name);

struct RelevanceJudgment {
  JudgeMode mode = JudgeMode::kGoldIds;
  std::set<std::string> gold_ids;
  std::vector<std::string> answers;
};

/// Lowercases ASCII letters and collapses whitespace runs to one space.
std::string normalize_for_match(std::string_view text);

/// Gold-id membership, or case/whitespace-insensitive containment of any
/// answer in doc_text. Throws kData in answer mode without doc text.
bool judge_relevant(std::string_view doc_id, const std::optional<std::string>& doc_text,
                    const RelevanceJudgment& judgment);

struct MetricsReport {
  double recall_at_k = 0.0;
  double mrr_at_k = 0.0;
  std::size_t k = 10;
  std::size_t num_queries = 0;
};

/// Recall@k and MRR@k over the queries present in the run. Entries with
/// rank > k are ignored. Throws kData when a run query has no judgment.
MetricsReport evaluate_run(std::span<const RunEntry> run,
                           const std::map<std::string, RelevanceJudgment>& judgments,
                           const std::map<std::string, std::string>& doc_texts = {},
                           std::size_t k = 10);

/// {"recall_at_<k>", "mrr_at_<k>", "k", "num_queries"} plus optional
/// metadata members.
std::string metrics_to_json(const MetricsReport& report,
                            const std::map<std::string, std::string>& metadata = {});

/// "query_id doc_id rank score tag" per line; scores with 17 significant digits.
std::string run_to_text(std::span<const RunEntry> run);
void write_run(const std::filesystem::path& path, std::span<const RunEntry> run);
std::vector<RunEntry> read_run(const std::filesystem::path& path);
std::vector<RunEntry> parse_run(const std::string& text, const std::string& source);

/// Index file: {"format_version": 1, "mode", "doc_ids", "embeddings"}.
void save_index(const CorpusIndex& index, EncoderMode mode, const std::filesystem::path& path);
CorpusIndex load_index(const std::filesystem::path& path);

}  // namespace vdistill

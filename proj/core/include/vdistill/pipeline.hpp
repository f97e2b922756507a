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

// End-to-end experiment orchestration used by the CLI and the acceptance
// suite: synthesize data, train teacher and student, distill, index, search
// and evaluate, plus the distillation ablation table.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vdistill/retrieval.hpp"
#include "vdistill/synthdata.hpp"
#include "vdistill/trainer.hpp"

namespace vdistill {

struct EvalSettings {
  std::size_t k = 10;
  double hybrid_alpha = kDefaultHybridAlpha;
  std::size_t workers = 1;
  JudgeMode judge = JudgeMode::kGoldIds;
};

/// Root seed drives every random choice: data generation, initialization,
/// and batch order of both stages.
struct PipelineConfig {
  std::uint64_t seed = 0;
  SynthConfig synth;
  Architecture arch;
  TrainConfig stage1;
  TrainConfig distill;
  EvalSettings eval;

  /// Copies the root seed into every sub-config.
  PipelineConfig with_seed(std::uint64_t root) const;
  void validate() const;
};

/// The bundled desk-scale benchmark preset (text-rich regime).
PipelineConfig default_pipeline_config(std::uint64_t seed = 0);

/// Sectioned JSON: {"seed", "synth": {...}, "architecture": {...},
/// "stage1": {...}, "distill": {...}, "eval": {...}}. Omitted sections keep
/// the preset values; unknown keys at any level are rejected.
PipelineConfig pipeline_config_from_json(const std::string& text, const std::string& source);
std::string pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
/// "section.key=value" (e.g. "stage1.epochs=3") or "seed=7".
void apply_pipeline_override(PipelineConfig& config, const std::string& assignment);

/// Synth config as a flat JSON object; unknown keys rejected.
SynthConfig synth_config_from_json(const std::string& text, const std::string& source);
std::string synth_config_to_json(const SynthConfig& config);

struct EvaluatedRun {
  std::vector<RunEntry> run;
  MetricsReport metrics;
};

/// Judgments for a query list: gold ids from positives or answers.
std::map<std::string, RelevanceJudgment> judgments_for(const std::vector<QueryRecord>& queries,
                                                       JudgeMode mode);
std::map<std::string, std::string> doc_texts(const std::vector<FeatureRecord>& corpus);

/// Searches every query against the index built from `model`.
std::vector<RunEntry> search_queries(const DualEncoder& model, const CorpusIndex& index,
                                     const std::vector<QueryRecord>& queries, std::size_t k,
                                     const std::string& tag, std::size_t workers);

/// Interpolates the cosine scores of two models over the full corpus.
std::vector<RunEntry> hybrid_queries(const DualEncoder& model_a, const CorpusIndex& index_a,
                                     const DualEncoder& model_b, const CorpusIndex& index_b,
                                     const std::vector<QueryRecord>& queries, double alpha,
                                     std::size_t k, const std::string& tag, std::size_t workers);

EncoderMode mode_for(const DualEncoder& model);

EvaluatedRun evaluate_model(const DualEncoder& model, const std::vector<FeatureRecord>& corpus,
                            const std::vector<QueryRecord>& queries, const EvalSettings& eval,
                            const std::string& tag);

/// Mean cosine between student and teacher document embeddings over the
/// first `sample` documents.
double mean_doc_cosine(const DualEncoder& teacher, const DualEncoder& student,
                       const std::vector<FeatureRecord>& docs, std::size_t sample);

struct Stage1Result {
  TrainingRun teacher;
  TrainingRun student;
};

/// Initializes teacher and student from the root seed and trains both
/// independently on the training queries' first positives. Input widths are
/// taken from the data.
Stage1Result run_stage1(const PipelineConfig& config, const std::vector<FeatureRecord>& corpus,
                        const std::vector<QueryRecord>& train_queries);

struct PipelineResult {
  DualEncoder teacher;
  DualEncoder student_pre;
  DualEncoder student_distilled;
  TrainingRun teacher_run;
  TrainingRun student_run;
  TrainingRun distill_run;
  /// Keys: teacher, student_pre, student_distilled, hybrid.
  std::map<std::string, EvaluatedRun> results;
};

/// Runs everything in memory; when out_dir is given also writes the corpus,
/// query splits, checkpoints, loss traces, run files and metrics JSON there.
PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

/// Distillation variants in table order: full, no_reweight, no_align,
/// no_soft, no_distill. no_align and no_soft also drop re-weighting.
const std::vector<std::string>& ablation_variants();

/// Trains stage 1 once per seed, then every variant from the same stage-1
/// models and batch order.
std::vector<AblationRow> run_ablation(const PipelineConfig& config,
                                      const std::vector<std::uint64_t>& seeds);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace vdistill

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

// Two-stage optimization driver.
//
// Stage 1 trains a dual encoder (query encoder + document encoder) with
// InfoNCE over in-batch negatives. Stage 2 freezes a stage-1 teacher and
// trains the student on the weighted alignment + soft-label objective.
// Both stages are single-threaded and fully determined by the config seed.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vdistill/dataset.hpp"
#include "vdistill/encoder.hpp"
#include "vdistill/losses.hpp"

namespace vdistill {

enum class OptimizerKind { kAdam, kSgd };

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 2;
  double learning_rate = 2e-5;
  double tau_soft = 1.0;
  double tau_weight = 1.0;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool align_normalized = false;
  bool include_hard_in_distill = false;
  // Ablation switches for the distillation objective.
  bool use_align = true;
  bool use_soft = true;
  bool use_reweight = true;

  /// Throws kConfig.
  void validate() const;
  DistillOptions distill_options() const;
};

/// Keys accepted in a train config JSON document.
const std::vector<std::string>& train_config_keys();

/// Flat JSON object mirroring TrainConfig; unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text, const std::string& source);
std::string train_config_to_json(const TrainConfig& config);
/// Applies one "key=value" override.
void apply_override(TrainConfig& config, const std::string& key, const std::string& value);

/// Which document view the model reads.
enum class ModelKind { kTeacher, kStudent };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct DualEncoder {
  ModelKind kind = ModelKind::kStudent;
  EncoderParams query;
  EncoderParams doc;

  bool operator==(const DualEncoder&) const = default;
};

/// Document encoder input for this model's view.
std::vector<double> doc_input(ModelKind kind, const FeatureRecord& doc);
EmbeddingVector encode_doc(const DualEncoder& model, const FeatureRecord& doc);

struct Architecture {
  std::vector<std::size_t> hidden_dims = {64};
  std::size_t embedding_dim = 32;
};

/// Xavier-initialized dual encoder. Query and doc encoders draw from
/// distinct seeds derived from `seed`.
DualEncoder init_dual_encoder(ModelKind kind, std::uint64_t seed, std::size_t query_dim,
                              std::size_t doc_input_dim, const Architecture& arch);

/// FNV-1a over every parameter bit pattern.
std::uint64_t params_hash(const DualEncoder& model);

using Batch = std::vector<std::size_t>;

/// Shuffles pair indices with a generator keyed by (seed, epoch) and cuts
/// batches of batch_size; a trailing batch with fewer than 2 pairs is dropped.
std::vector<Batch> make_batches(std::size_t num_pairs, std::size_t batch_size,
                                std::uint64_t seed, std::size_t epoch);

enum class Stage { kIndependent, kDistill };
std::string to_string(Stage stage);

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  Stage stage = Stage::kIndependent;
  LossBreakdown loss;
};

struct TrainingRun {
  Stage stage = Stage::kIndependent;
  std::vector<StepRecord> trace;  // one record per optimizer step
  DualEncoder params;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

/// In-place update of params from grads (Adam with bias correction, or SGD).
void optimizer_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                    const TrainConfig& config);

/// InfoNCE training of `initial` on in-batch negatives.
/// Throws kNumerical naming the batch when the loss goes non-finite.
TrainingRun train_stage1(const DualEncoder& initial, const std::vector<TrainingPair>& pairs,
                         const TrainConfig& config);

/// Distills `teacher` (never modified) into a copy of `student`.
TrainingRun distill(const DualEncoder& teacher, const DualEncoder& student,
                    const std::vector<TrainingPair>& pairs, const TrainConfig& config);

/// Model checkpoint: {"format_version": 1, "model": "teacher"|"student",
/// "seed": ..., "query_encoder": {...}, "doc_encoder": {...}} where both
/// encoders use the single-encoder checkpoint layout.
std::string checkpoint_to_json(const DualEncoder& model, std::uint64_t seed);
DualEncoder checkpoint_from_json(const std::string& text, const std::string& source);
void save_checkpoint(const DualEncoder& model, std::uint64_t seed,
                     const std::filesystem::path& path);
DualEncoder load_checkpoint(const std::filesystem::path& path);

/// "step,stage,hard,align,soft,total" with one row per trace record.
std::string loss_trace_csv(const std::vector<StepRecord>& trace);
void write_loss_csv(const std::vector<StepRecord>& trace, const std::filesystem::path& path);

/// Mean of a loss component over the records of one epoch.
double epoch_mean(const std::vector<StepRecord>& trace, std::size_t epoch,
                  double LossBreakdown::*component);

}  // namespace vdistill

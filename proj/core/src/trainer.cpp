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

#include "vdistill/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <random>

#include "json_codec.hpp"
#include "vdistill/error.hpp"
#include "vdistill/synthdata.hpp"

namespace vdistill {
namespace {

using detail::json;

constexpr std::uint64_t kBatchStream = 100;
constexpr std::uint64_t kInitStream = 101;

json config_to_json_value(const TrainConfig& c) {
  return {
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"learning_rate", c.learning_rate},
      {"tau_soft", c.tau_soft},
      {"tau_weight", c.tau_weight},
      {"seed", c.seed},
      {"optimizer", c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"eps", c.eps},
      {"align_normalized", c.align_normalized},
      {"include_hard_in_distill", c.include_hard_in_distill},
      {"use_align", c.use_align},
      {"use_soft", c.use_soft},
      {"use_reweight", c.use_reweight},
  };
}

std::size_t count_field(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    fail(ErrorKind::kConfig, key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

double real_field(const json& v, const std::string& key) {
  if (!v.is_number()) fail(ErrorKind::kConfig, key + ": expected a number");
  return v.get<double>();
}

bool bool_field(const json& v, const std::string& key) {
  if (!v.is_boolean()) fail(ErrorKind::kConfig, key + ": expected true or false");
  return v.get<bool>();
}

TrainConfig config_from_json_value(const json& obj, const std::string& source) {
  detail::reject_unknown_keys(obj, train_config_keys(), source);
  TrainConfig c;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "batch_size") c.batch_size = count_field(v, k);
    else if (k == "epochs") c.epochs = count_field(v, k);
    else if (k == "learning_rate") c.learning_rate = real_field(v, k);
    else if (k == "tau_soft") c.tau_soft = real_field(v, k);
    else if (k == "tau_weight") c.tau_weight = real_field(v, k);
    else if (k == "seed") c.seed = count_field(v, k);
    else if (k == "optimizer") {
      if (v == "adam") c.optimizer = OptimizerKind::kAdam;
      else if (v == "sgd") c.optimizer = OptimizerKind::kSgd;
      else fail(ErrorKind::kConfig, "optimizer: expected \"adam\" or \"sgd\"");
    }
    else if (k == "beta1") c.beta1 = real_field(v, k);
    else if (k == "beta2") c.beta2 = real_field(v, k);
    else if (k == "eps") c.eps = real_field(v, k);
    else if (k == "align_normalized") c.align_normalized = bool_field(v, k);
    else if (k == "include_hard_in_distill") c.include_hard_in_distill = bool_field(v, k);
    else if (k == "use_align") c.use_align = bool_field(v, k);
    else if (k == "use_soft") c.use_soft = bool_field(v, k);
    else if (k == "use_reweight") c.use_reweight = bool_field(v, k);
  }
  c.validate();
  return c;
}

void check_finite(const LossBreakdown& loss, std::size_t step, std::size_t epoch,
                  std::size_t batch) {
  if (!std::isfinite(loss.total) || !std::isfinite(loss.hard) || !std::isfinite(loss.align) ||
      !std::isfinite(loss.soft)) {
    fail(ErrorKind::kNumerical, "non-finite loss at step " + std::to_string(step) + " (epoch " +
                                    std::to_string(epoch) + ", batch " + std::to_string(batch) +
                                    ")");
  }
}

// Adam/SGD state for both encoders of a dual encoder.
struct ModelOptimizer {
  AdamState query;
  AdamState doc;

  void step(DualEncoder& model, const EncoderGradients& gq, const EncoderGradients& gd,
            const TrainConfig& config) {
    apply(model.query, gq, query, config);
    apply(model.doc, gd, doc, config);
  }

  static void apply(EncoderParams& params, const EncoderGradients& grads, AdamState& state,
                    const TrainConfig& config) {
    std::vector<double> flat = flatten(params);
    optimizer_step(flat, flatten(grads), state, config);
    unflatten(flat, params);
  }
};

// Backpropagates per-example embedding gradients into encoder gradients,
// summing in example order.
EncoderGradients backprop(const EncoderParams& params,
                          const std::vector<std::vector<double>>& inputs,
                          const std::vector<std::vector<double>>& grad_embeddings) {
  EncoderGradients total = zero_gradients(params);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    accumulate(total, encoder_backward(params, inputs[i], grad_embeddings[i]));
  }
  return total;
}

std::vector<EmbeddingVector> encode_all(const EncoderParams& params,
                                        const std::vector<std::vector<double>>& inputs) {
  std::vector<EmbeddingVector> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(encode_query(params, x));
  return out;
}

}  // namespace

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "batch_size", "epochs", "learning_rate", "tau_soft", "tau_weight",
      "seed", "optimizer", "beta1", "beta2", "eps", "align_normalized",
      "include_hard_in_distill", "use_align", "use_soft", "use_reweight"};
  return keys;
}

void TrainConfig::validate() const {
  require(batch_size >= 2, ErrorKind::kConfig,
          "batch_size must be >= 2 (in-batch negatives need at least one negative)");
  require(epochs >= 1, ErrorKind::kConfig, "epochs must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate >= 0.0, ErrorKind::kConfig,
          "learning_rate must be finite and >= 0");
  require(tau_soft > 0.0 && std::isfinite(tau_soft), ErrorKind::kConfig,
          "tau_soft must be positive");
  require(tau_weight > 0.0 && std::isfinite(tau_weight), ErrorKind::kConfig,
          "tau_weight must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::kConfig,
          "beta1 and beta2 must lie in [0, 1)");
  require(eps > 0.0, ErrorKind::kConfig, "eps must be positive");
}

DistillOptions TrainConfig::distill_options() const {
  DistillOptions o;
  o.tau_soft = tau_soft;
  o.tau_weight = tau_weight;
  o.use_align = use_align;
  o.use_soft = use_soft;
  o.use_reweight = use_reweight;
  o.align_normalized = align_normalized;
  o.include_hard = include_hard_in_distill;
  return o;
}

TrainConfig train_config_from_json(const std::string& text, const std::string& source) {
  json obj = detail::parse_json(text, source);
  if (!obj.is_object()) fail(ErrorKind::kConfig, source + ": expected a JSON object");
  return config_from_json_value(obj, source);
}

std::string train_config_to_json(const TrainConfig& config) {
  return config_to_json_value(config).dump(2);
}

void apply_override(TrainConfig& config, const std::string& key, const std::string& value) {
  const auto& keys = train_config_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
  }
  json obj = config_to_json_value(config);
  json parsed = json::parse(value, nullptr, false);
  obj[key] = parsed.is_discarded() ? json(value) : parsed;
  config = config_from_json_value(obj, "override " + key);
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kTeacher ? "teacher" : "student";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "teacher") return ModelKind::kTeacher;
  if (name == "student") return ModelKind::kStudent;
  fail(ErrorKind::kConfig, "model: expected teacher or student, got '" + name + "'");
}

std::string to_string(Stage stage) {
  return stage == Stage::kIndependent ? "independent" : "distill";
}

std::vector<double> doc_input(ModelKind kind, const FeatureRecord& doc) {
  return kind == ModelKind::kTeacher ? teacher_input(doc) : doc.visual_features;
}

EmbeddingVector encode_doc(const DualEncoder& model, const FeatureRecord& doc) {
  return model.kind == ModelKind::kTeacher ? encode_doc_teacher(model.doc, doc)
                                           : encode_doc_student(model.doc, doc);
}

DualEncoder init_dual_encoder(ModelKind kind, std::uint64_t seed, std::size_t query_dim,
                              std::size_t doc_input_dim, const Architecture& arch) {
  auto dims_for = [&](std::size_t input) {
    std::vector<std::size_t> dims{input};
    dims.insert(dims.end(), arch.hidden_dims.begin(), arch.hidden_dims.end());
    dims.push_back(arch.embedding_dim);
    return dims;
  };
  DualEncoder model;
  model.kind = kind;
  model.query = init_params(mix_seed(seed, kInitStream, 0), dims_for(query_dim));
  model.doc = init_params(mix_seed(seed, kInitStream, 1), dims_for(doc_input_dim));
  return model;
}

std::uint64_t params_hash(const DualEncoder& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  };
  feed(model.kind == ModelKind::kTeacher ? 1.0 : 0.0);
  for (double v : flatten(model.query)) feed(v);
  for (double v : flatten(model.doc)) feed(v);
  return h;
}

std::vector<Batch> make_batches(std::size_t num_pairs, std::size_t batch_size,
                                std::uint64_t seed, std::size_t epoch) {
  require(num_pairs >= 1, ErrorKind::kContract, "make_batches needs at least one pair");
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be positive");
  std::vector<std::size_t> order(num_pairs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, kBatchStream, epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < num_pairs; start += batch_size) {
    const std::size_t end = std::min(num_pairs, start + batch_size);
    if (end - start < 2) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

void optimizer_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                    const TrainConfig& config) {
  require(params.size() == grads.size(), ErrorKind::kContract,
          "optimizer_step: gradient has " + std::to_string(grads.size()) +
              " entries for " + std::to_string(params.size()) + " parameters");
  const double lr = config.learning_rate;
  if (config.optimizer == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
    return;
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  require(state.m.size() == params.size(), ErrorKind::kContract,
          "optimizer_step: Adam state does not match the parameter count");
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

TrainingRun train_stage1(const DualEncoder& initial, const std::vector<TrainingPair>& pairs,
                         const TrainConfig& config) {
  config.validate();
  require(!pairs.empty(), ErrorKind::kContract, "training needs at least one pair");
  TrainingRun run;
  run.stage = Stage::kIndependent;
  run.params = initial;
  DualEncoder& model = run.params;
  ModelOptimizer opt;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(pairs.size(), config.batch_size, config.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<std::vector<double>> q_in, d_in;
      for (std::size_t idx : batches[b]) {
        q_in.push_back(pairs[idx].query_features);
        d_in.push_back(doc_input(model.kind, pairs[idx].doc));
      }
      const auto queries = encode_all(model.query, q_in);
      const auto docs = encode_all(model.doc, d_in);
      const InBatchLoss loss = in_batch_infonce(queries, docs);
      LossBreakdown breakdown;
      breakdown.hard = loss.value;
      breakdown.total = loss.value;
      check_finite(breakdown, step, epoch, b);
      opt.step(model, backprop(model.query, q_in, loss.d_queries),
               backprop(model.doc, d_in, loss.d_docs), config);
      run.trace.push_back(StepRecord{step, epoch, Stage::kIndependent, std::move(breakdown)});
      ++step;
    }
  }
  return run;
}

TrainingRun distill(const DualEncoder& teacher, const DualEncoder& student,
                    const std::vector<TrainingPair>& pairs, const TrainConfig& config) {
  config.validate();
  require(!pairs.empty(), ErrorKind::kContract, "distillation needs at least one pair");
  require(teacher.query.embedding_dim() == student.query.embedding_dim() &&
              teacher.doc.embedding_dim() == student.doc.embedding_dim(),
          ErrorKind::kDimension, "teacher and student embedding dims differ");
  const DistillOptions options = config.distill_options();
  TrainingRun run;
  run.stage = Stage::kDistill;
  run.params = student;
  DualEncoder& model = run.params;
  ModelOptimizer opt;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(pairs.size(), config.batch_size, config.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<std::vector<double>> q_in, d_in;
      DistillBatch batch;
      for (std::size_t idx : batches[b]) {
        const TrainingPair& pair = pairs[idx];
        q_in.push_back(pair.query_features);
        d_in.push_back(doc_input(model.kind, pair.doc));
        batch.teacher_queries.push_back(encode_query(teacher.query, pair.query_features));
        batch.teacher_docs.push_back(encode_doc(teacher, pair.doc));
      }
      batch.student_queries = encode_all(model.query, q_in);
      batch.student_docs = encode_all(model.doc, d_in);
      LossBreakdown breakdown = total_distill_loss(batch, options);
      check_finite(breakdown, step, epoch, b);
      const DistillGradients grads = grad_total_distill_loss(batch, options);
      opt.step(model, backprop(model.query, q_in, grads.student_queries),
               backprop(model.doc, d_in, grads.student_docs), config);
      run.trace.push_back(StepRecord{step, epoch, Stage::kDistill, std::move(breakdown)});
      ++step;
    }
  }
  return run;
}

std::string checkpoint_to_json(const DualEncoder& model, std::uint64_t seed) {
  json obj = {
      {"format_version", detail::kFormatVersion},
      {"model", to_string(model.kind)},
      {"seed", seed},
      {"query_encoder", detail::encoder_to_json_value(model.query)},
      {"doc_encoder", detail::encoder_to_json_value(model.doc)},
  };
  return obj.dump();
}

DualEncoder checkpoint_from_json(const std::string& text, const std::string& source) {
  const json obj = detail::parse_json(text, source);
  const std::string where = source + ": ";
  if (!obj.is_object()) fail(ErrorKind::kFormat, where + "expected a JSON object");
  const json& version = detail::field(obj, "format_version", where);
  if (!version.is_number_integer() || version.get<long long>() != detail::kFormatVersion) {
    fail(ErrorKind::kFormat, where + "format_version: unsupported version " + version.dump());
  }
  const json& model = detail::field(obj, "model", where);
  if (!model.is_string()) fail(ErrorKind::kFormat, where + "model: expected a string");
  DualEncoder out;
  try {
    out.kind = model_kind_from_string(model.get<std::string>());
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, where + "model: " + e.what());
  }
  out.query = detail::encoder_from_json_value(detail::field(obj, "query_encoder", where),
                                              where + "query_encoder.");
  out.doc = detail::encoder_from_json_value(detail::field(obj, "doc_encoder", where),
                                            where + "doc_encoder.");
  try {
    out.query.validate();
    out.doc.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, where + e.what());
  }
  return out;
}

void save_checkpoint(const DualEncoder& model, std::uint64_t seed,
                     const std::filesystem::path& path) {
  detail::write_file(path, checkpoint_to_json(model, seed) + "\n");
}

DualEncoder load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(detail::read_file(path), path.string());
}

std::string loss_trace_csv(const std::vector<StepRecord>& trace) {
  std::string out = "step,stage,hard,align,soft,total\n";
  char buf[256];
  for (const StepRecord& r : trace) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g,%.17g,%.17g\n", r.step,
                  to_string(r.stage).c_str(), r.loss.hard, r.loss.align, r.loss.soft,
                  r.loss.total);
    out += buf;
  }
  return out;
}

void write_loss_csv(const std::vector<StepRecord>& trace, const std::filesystem::path& path) {
  detail::write_file(path, loss_trace_csv(trace));
}

double epoch_mean(const std::vector<StepRecord>& trace, std::size_t epoch,
                  double LossBreakdown::*component) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const StepRecord& r : trace) {
    if (r.epoch != epoch) continue;
    sum += r.loss.*component;
    ++count;
  }
  require(count > 0, ErrorKind::kContract, "no trace records for epoch " + std::to_string(epoch));
  return sum / static_cast<double>(count);
}

}  // namespace vdistill

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

// Toy dual encoders: stacks of affine maps with tanh on every hidden layer
// and identity on the last one. The final layer output is the pooled
// embedding. The teacher document encoder reads [visual || text]; the
// student document encoder reads the visual view only.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdistill/linalg.hpp"

namespace vdistill {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  std::span<const double> view() const { return values; }
  double operator[](std::size_t i) const { return values[i]; }

  bool operator==(const EmbeddingVector&) const = default;
};

struct Layer {
  Matrix weight;  // out_dim x in_dim
  std::vector<double> bias;

  std::size_t in_dim() const { return weight.cols; }
  std::size_t out_dim() const { return weight.rows; }

  bool operator==(const Layer&) const = default;
};

struct EncoderParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t embedding_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  /// (input_dim, out_dim of layer 0, ..., embedding_dim)
  std::vector<std::size_t> layer_dims() const;
  std::size_t num_parameters() const;

  /// Throws kConfig if layers do not chain, are empty, or hold non-finite values.
  void validate() const;

  bool operator==(const EncoderParams&) const = default;
};

/// One document (or query) feature record. `text` is the optional raw page
/// text used for answer-containment judging; encoders never read it.
struct FeatureRecord {
  std::string id;
  std::vector<double> visual_features;
  std::optional<std::vector<double>> text_features;
  std::optional<std::string> text;
};

/// Gradients with the same layout as EncoderParams, plus d(loss)/d(input).
struct EncoderGradients {
  std::vector<Layer> layers;
  std::vector<double> input;
};

/// Raw forward pass. Throws kDimension if input.size() != input_dim.
std::vector<double> forward(const EncoderParams& params, std::span<const double> input);

EmbeddingVector encode_query(const EncoderParams& params,
                             std::span<const double> query_features);

EmbeddingVector encode_doc_student(const EncoderParams& params, const FeatureRecord& doc);

/// Throws kData ("teacher requires text view") when doc has no text_features.
EmbeddingVector encode_doc_teacher(const EncoderParams& params, const FeatureRecord& doc);

/// [visual || text]; throws like encode_doc_teacher when the text view is absent.
std::vector<double> teacher_input(const FeatureRecord& doc);

/// Exact gradients of a scalar whose gradient w.r.t. the embedding
/// forward(params, input) is grad_output.
EncoderGradients encoder_backward(const EncoderParams& params,
                                  std::span<const double> input,
                                  std::span<const double> grad_output);

/// Xavier-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
/// layer_dims = (input_dim, hidden..., embedding_dim).
EncoderParams init_params(std::uint64_t seed, std::span<const std::size_t> layer_dims);

EncoderGradients zero_gradients(const EncoderParams& params);
void accumulate(EncoderGradients& into, const EncoderGradients& from);

/// Parameters in layer order: weight row-major, then bias.
std::vector<double> flatten(const EncoderParams& params);
std::vector<double> flatten(const EncoderGradients& grads);
void unflatten(std::span<const double> flat, EncoderParams& params);

/// Single-encoder checkpoint document:
/// {"format_version": 1, "layer_dims": [...], "activation": "tanh",
///  "layers": [{"weight": [[...]], "bias": [...]}]}
std::string encoder_to_json(const EncoderParams& params);
EncoderParams encoder_from_json(const std::string& text);

void save_encoder(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_encoder(const std::filesystem::path& path);

}  // namespace vdistill

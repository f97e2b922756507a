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

#include "vdistill/encoder.hpp"

#include <cmath>
#include <random>

#include "json_codec.hpp"
#include "vdistill/error.hpp"

namespace vdistill {
namespace {

std::string dims_message(const char* what, std::size_t got, std::size_t want) {
  return std::string(what) + ": got length " + std::to_string(got) + ", expected " +
         std::to_string(want);
}

// Affine map of one layer: out = W x + b.
void affine(const Layer& layer, std::span<const double> x, std::vector<double>& out) {
  out.assign(layer.bias.begin(), layer.bias.end());
  for (std::size_t r = 0; r < layer.out_dim(); ++r) out[r] += dot(layer.weight.row(r), x);
}

// Inputs of every layer plus the final output; activations[l] feeds layer l.
std::vector<std::vector<double>> forward_trace(const EncoderParams& params,
                                               std::span<const double> input) {
  std::vector<std::vector<double>> acts;
  acts.reserve(params.layers.size() + 1);
  acts.emplace_back(input.begin(), input.end());
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    std::vector<double> out;
    affine(params.layers[l], acts.back(), out);
    if (l != last) {
      for (double& v : out) v = std::tanh(v);
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

EmbeddingVector checked_embedding(std::vector<double> values) {
  if (!all_finite(values)) {
    fail(ErrorKind::kNumerical, "encoder produced a non-finite embedding");
  }
  return EmbeddingVector{std::move(values)};
}

}  // namespace

std::vector<std::size_t> EncoderParams::layer_dims() const {
  std::vector<std::size_t> dims;
  if (layers.empty()) return dims;
  dims.push_back(input_dim());
  for (const Layer& layer : layers) dims.push_back(layer.out_dim());
  return dims;
}

std::size_t EncoderParams::num_parameters() const {
  std::size_t n = 0;
  for (const Layer& layer : layers) n += layer.weight.data.size() + layer.bias.size();
  return n;
}

void EncoderParams::validate() const {
  require(!layers.empty(), ErrorKind::kConfig, "encoder has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    const std::string name = "layer " + std::to_string(l);
    require(layer.in_dim() > 0 && layer.out_dim() > 0, ErrorKind::kConfig,
            name + " has a zero dimension");
    require(layer.weight.data.size() == layer.in_dim() * layer.out_dim(), ErrorKind::kConfig,
            name + " weight storage does not match its shape");
    require(layer.bias.size() == layer.out_dim(), ErrorKind::kConfig,
            name + " bias length does not match out_dim");
    if (l + 1 < layers.size()) {
      require(layer.out_dim() == layers[l + 1].in_dim(), ErrorKind::kConfig,
              name + " out_dim does not chain into the next layer");
    }
    require(all_finite(layer.weight.data) && all_finite(layer.bias), ErrorKind::kConfig,
            name + " holds non-finite values");
  }
}

std::vector<double> forward(const EncoderParams& params, std::span<const double> input) {
  require(!params.layers.empty(), ErrorKind::kConfig, "encoder has no layers");
  require(input.size() == params.input_dim(), ErrorKind::kDimension,
          dims_message("encoder input", input.size(), params.input_dim()));
  return std::move(forward_trace(params, input).back());
}

EmbeddingVector encode_query(const EncoderParams& params,
                             std::span<const double> query_features) {
  return checked_embedding(forward(params, query_features));
}

EmbeddingVector encode_doc_student(const EncoderParams& params, const FeatureRecord& doc) {
  return checked_embedding(forward(params, doc.visual_features));
}

std::vector<double> teacher_input(const FeatureRecord& doc) {
  if (!doc.text_features) {
    fail(ErrorKind::kData, "teacher requires text view (document '" + doc.id + "')");
  }
  std::vector<double> joined = doc.visual_features;
  joined.insert(joined.end(), doc.text_features->begin(), doc.text_features->end());
  return joined;
}

EmbeddingVector encode_doc_teacher(const EncoderParams& params, const FeatureRecord& doc) {
  return checked_embedding(forward(params, teacher_input(doc)));
}

EncoderGradients encoder_backward(const EncoderParams& params,
                                  std::span<const double> input,
                                  std::span<const double> grad_output) {
  require(!params.layers.empty(), ErrorKind::kConfig, "encoder has no layers");
  require(input.size() == params.input_dim(), ErrorKind::kDimension,
          dims_message("backward input", input.size(), params.input_dim()));
  require(grad_output.size() == params.embedding_dim(), ErrorKind::kDimension,
          dims_message("backward grad_output", grad_output.size(), params.embedding_dim()));

  const auto acts = forward_trace(params, input);
  EncoderGradients grads;
  grads.layers.resize(params.layers.size());

  std::vector<double> upstream(grad_output.begin(), grad_output.end());
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Layer& layer = params.layers[l];
    if (l != last) {
      // tanh'(z) = 1 - tanh(z)^2, and acts[l + 1] already holds tanh(z).
      for (std::size_t i = 0; i < upstream.size(); ++i) {
        const double y = acts[l + 1][i];
        upstream[i] *= 1.0 - y * y;
      }
    }
    const std::vector<double>& in = acts[l];
    Layer& g = grads.layers[l];
    g.weight = Matrix(layer.out_dim(), layer.in_dim());
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      auto row = g.weight.row(r);
      for (std::size_t c = 0; c < layer.in_dim(); ++c) row[c] = upstream[r] * in[c];
    }
    g.bias = upstream;

    std::vector<double> down(layer.in_dim(), 0.0);
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      auto row = layer.weight.row(r);
      for (std::size_t c = 0; c < layer.in_dim(); ++c) down[c] += row[c] * upstream[r];
    }
    upstream = std::move(down);
  }
  grads.input = std::move(upstream);
  return grads;
}

EncoderParams init_params(std::uint64_t seed, std::span<const std::size_t> layer_dims) {
  require(layer_dims.size() >= 2, ErrorKind::kConfig,
          "layer_dims needs at least an input and an output dimension");
  for (std::size_t d : layer_dims) {
    require(d > 0, ErrorKind::kConfig, "layer_dims entries must be positive");
  }
  std::mt19937_64 rng(seed);
  EncoderParams params;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t in = layer_dims[l];
    const std::size_t out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    for (double& w : layer.weight.data) w = dist(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

EncoderGradients zero_gradients(const EncoderParams& params) {
  EncoderGradients grads;
  for (const Layer& layer : params.layers) {
    grads.layers.push_back(
        Layer{Matrix(layer.out_dim(), layer.in_dim()), std::vector<double>(layer.out_dim())});
  }
  grads.input.assign(params.input_dim(), 0.0);
  return grads;
}

void accumulate(EncoderGradients& into, const EncoderGradients& from) {
  require(into.layers.size() == from.layers.size(), ErrorKind::kDimension,
          "gradient layer counts differ");
  for (std::size_t l = 0; l < into.layers.size(); ++l) {
    auto& dst = into.layers[l];
    const auto& src = from.layers[l];
    require(dst.weight.data.size() == src.weight.data.size() &&
                dst.bias.size() == src.bias.size(),
            ErrorKind::kDimension, "gradient shapes differ");
    for (std::size_t i = 0; i < dst.weight.data.size(); ++i) dst.weight.data[i] += src.weight.data[i];
    for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += src.bias[i];
  }
  if (into.input.size() == from.input.size()) {
    for (std::size_t i = 0; i < into.input.size(); ++i) into.input[i] += from.input[i];
  }
}

namespace {

std::vector<double> flatten_layers(const std::vector<Layer>& layers) {
  std::vector<double> flat;
  for (const Layer& layer : layers) {
    flat.insert(flat.end(), layer.weight.data.begin(), layer.weight.data.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

}  // namespace

std::vector<double> flatten(const EncoderParams& params) { return flatten_layers(params.layers); }

std::vector<double> flatten(const EncoderGradients& grads) { return flatten_layers(grads.layers); }

void unflatten(std::span<const double> flat, EncoderParams& params) {
  require(flat.size() == params.num_parameters(), ErrorKind::kDimension,
          dims_message("flat parameter vector", flat.size(), params.num_parameters()));
  std::size_t pos = 0;
  for (Layer& layer : params.layers) {
    for (double& w : layer.weight.data) w = flat[pos++];
    for (double& b : layer.bias) b = flat[pos++];
  }
}

std::string encoder_to_json(const EncoderParams& params) {
  return detail::encoder_to_json_value(params).dump();
}

EncoderParams encoder_from_json(const std::string& text) {
  EncoderParams params =
      detail::encoder_from_json_value(detail::parse_json(text, "encoder checkpoint"), "");
  params.validate();
  return params;
}

void save_encoder(const EncoderParams& params, const std::filesystem::path& path) {
  detail::write_file(path, encoder_to_json(params) + "\n");
}

EncoderParams load_encoder(const std::filesystem::path& path) {
  return encoder_from_json(detail::read_file(path));
}

}  // namespace vdistill

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

#include "json_codec.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace vdistill::detail {

json encoder_to_json_value(const EncoderParams& params) {
  json layers = json::array();
  for (const Layer& layer : params.layers) {
    json weight = json::array();
    for (std::size_t r = 0; r < layer.weight.rows; ++r) {
      auto row = layer.weight.row(r);
      weight.push_back(std::vector<double>(row.begin(), row.end()));
    }
    layers.push_back({{"weight", std::move(weight)}, {"bias", layer.bias}});
  }
  return {
      {"format_version", kFormatVersion},
      {"layer_dims", params.layer_dims()},
      {"activation", "tanh"},
      {"layers", std::move(layers)},
  };
}

EncoderParams encoder_from_json_value(const json& doc, const std::string& where) {
  if (!doc.is_object()) fail(ErrorKind::kFormat, where + ": expected an object");
  const json& version = field(doc, "format_version", where);
  if (!version.is_number_integer() || version.get<int>() != kFormatVersion) {
    fail(ErrorKind::kFormat, where + "format_version: unsupported version " + version.dump() +
                                 " (expected " + std::to_string(kFormatVersion) + ")");
  }
  const json& activation = field(doc, "activation", where);
  if (activation != "tanh") {
    fail(ErrorKind::kFormat, where + "activation: unsupported value " + activation.dump());
  }
  const json& dims_json = field(doc, "layer_dims", where);
  if (!dims_json.is_array() || dims_json.size() < 2) {
    fail(ErrorKind::kFormat, where + "layer_dims: expected an array of >= 2 integers");
  }
  std::vector<std::size_t> dims;
  for (const json& d : dims_json) {
    if (!d.is_number_integer() || d.get<long long>() <= 0) {
      fail(ErrorKind::kFormat, where + "layer_dims: entries must be positive integers");
    }
    dims.push_back(d.get<std::size_t>());
  }
  const json& layers_json = field(doc, "layers", where);
  if (!layers_json.is_array() || layers_json.size() != dims.size() - 1) {
    fail(ErrorKind::kFormat, where + "layers: expected " + std::to_string(dims.size() - 1) +
                                 " layers to match layer_dims");
  }
  EncoderParams params;
  for (std::size_t l = 0; l < layers_json.size(); ++l) {
    const std::string lw = where + "layers[" + std::to_string(l) + "].";
    const json& weight_json = field(layers_json[l], "weight", lw);
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    if (!weight_json.is_array() || weight_json.size() != out) {
      fail(ErrorKind::kFormat, lw + "weight: expected " + std::to_string(out) + " rows");
    }
    Layer layer{Matrix(out, in), {}};
    for (std::size_t r = 0; r < out; ++r) {
      std::vector<double> row = real_vector(weight_json[r], lw + "weight");
      if (row.size() != in) {
        fail(ErrorKind::kFormat, lw + "weight: row " + std::to_string(r) + " has " +
                                     std::to_string(row.size()) + " entries, expected " +
                                     std::to_string(in));
      }
      std::copy(row.begin(), row.end(), layer.weight.row(r).begin());
    }
    layer.bias = real_vector(field(layers_json[l], "bias", lw), lw + "bias");
    if (layer.bias.size() != out) {
      fail(ErrorKind::kFormat, lw + "bias: expected " + std::to_string(out) + " entries");
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kFormat, source + ": malformed JSON (" + e.what() + ")");
  }
}

const json& field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::kFormat, where + key + ": parent is not an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorKind::kFormat, where + key + ": missing field");
  return *it;
}

double real(const json& value, const std::string& where) {
  if (!value.is_number()) fail(ErrorKind::kFormat, where + ": expected a number");
  return value.get<double>();
}

std::vector<double> real_vector(const json& value, const std::string& where) {
  if (!value.is_array()) fail(ErrorKind::kFormat, where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(value.size());
  for (const json& v : value) out.push_back(real(v, where));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
    out << contents;
    if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot replace " + path.string() + ": " + ec.message());
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::kConfig, where + ": expected a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      fail(ErrorKind::kConfig, where + ": unknown key '" + it.key() + "'");
    }
  }
}

}  // namespace vdistill::detail

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

// Private JSON helpers shared by the core sources. Not installed.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdistill/encoder.hpp"
#include "vdistill/error.hpp"

namespace vdistill::detail {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

json encoder_to_json_value(const EncoderParams& params);
/// `where` prefixes field names in error messages (e.g. "query_encoder.").
EncoderParams encoder_from_json_value(const json& doc, const std::string& where);

/// Parses text; malformed JSON becomes a kFormat error mentioning `source`.
json parse_json(const std::string& text, const std::string& source);

const json& field(const json& obj, const std::string& key, const std::string& where);
std::vector<double> real_vector(const json& value, const std::string& where);
double real(const json& value, const std::string& where);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_file(const std::filesystem::path& path, const std::string& contents);

/// Rejects keys of `obj` that are not in `allowed` with a kConfig error.
void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& where);

}  // namespace vdistill::detail

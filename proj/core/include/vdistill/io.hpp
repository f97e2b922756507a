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


#pragma once

#include <filesystem>
#include <string>

namespace vdistill {

/// Throws kIo when the file cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

/// Creates parent directories, then writes through a temporary file and a
/// rename. Throws kIo on failure.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace vdistill

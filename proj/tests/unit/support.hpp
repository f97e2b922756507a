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
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "vdistill/encoder.hpp"
#include "vdistill/error.hpp"

namespace vdistill::testing {

inline Layer make_layer(const std::vector<std::vector<double>>& w, const std::vector<double>& b) {
  Layer layer;
  layer.weight = Matrix(w.size(), w.empty() ? 0 : w[0].size());
  for (std::size_t r = 0; r < w.size(); ++r) {
    for (std::size_t c = 0; c < w[r].size(); ++c) layer.weight(r, c) = w[r][c];
  }
  layer.bias = b;
  return layer;
}

inline EncoderParams identity_params(std::size_t dim) {
  std::vector<std::vector<double>> w(dim, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < dim; ++i) w[i][i] = 1.0;
  return EncoderParams{{make_layer(w, std::vector<double>(dim, 0.0))}};
}

inline EmbeddingVector ev(std::vector<double> v) { return EmbeddingVector{std::move(v)}; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("vdistill_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Runs fn and returns the kind of the vdistill::Error it throws.
template <typename Fn>
::testing::AssertionResult throws_kind(Fn&& fn, ErrorKind expected) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.kind() == expected) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure()
           << "threw " << to_string(e.kind()) << " (" << e.what() << "), expected "
           << to_string(expected);
  }
  return ::testing::AssertionFailure() << "did not throw";
}

}  // namespace vdistill::testing

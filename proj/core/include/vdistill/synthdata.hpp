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

// Seeded synthetic corpora with one latent vector per document and two noisy
// linear views of it:
//
//   center[t]   ~ N(0, I)                      t = 0 .. num_topics-1
//   latent[d]   = center[d % num_topics] + doc_spread * N(0, I)
//   visual[d]   = P_visual * latent[d] + visual_noise * N(0, I)
//   text[d]     = P_text   * latent[d] + text_noise   * N(0, I)
//   query(d)    = P_query  * (latent[d] + query_noise * N(0, I))
//
// Projection entries are N(0, 1 / latent_dim). Every record draws from its
// own stream derived from (seed, stream id, record index), so records are
// independent of generation order.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdistill/dataset.hpp"
#include "vdistill/encoder.hpp"
#include "vdistill/layout.hpp"
#include "vdistill/linalg.hpp"

namespace vdistill {

enum class Regime { kTextRich, kVisualRich };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

struct SynthConfig {
  std::size_t num_topics = 50;
  std::size_t corpus_size = 2000;
  std::size_t num_queries = 500;
  std::size_t visual_dim = 32;
  std::size_t text_dim = 32;
  std::size_t query_dim = 32;
  std::size_t latent_dim = 16;
  double doc_spread = 0.5;
  double visual_noise = 0.6;
  double text_noise = 0.1;
  double query_noise = 0.2;
  Regime regime = Regime::kTextRich;
  std::uint64_t seed = 0;

  /// Throws kConfig. The regime must agree with the noise levels: text_rich
  /// needs text_noise <= visual_noise and visual_rich the reverse.
  void validate() const;
};

/// Default desk-scale preset for a regime (noise 0.6/0.1 swapped between views).
SynthConfig synth_preset(Regime regime, std::uint64_t seed = 0);

/// The hidden generative state, exposed for oracles and tests.
struct SynthLatents {
  Matrix topic_centers;   // num_topics x latent_dim
  Matrix doc_latents;     // corpus_size x latent_dim
  Matrix visual_proj;     // visual_dim x latent_dim
  Matrix text_proj;       // text_dim x latent_dim
  Matrix query_proj;      // query_dim x latent_dim
};

SynthLatents gen_latents(const SynthConfig& config);

std::string synth_doc_id(std::size_t index);

std::vector<FeatureRecord> gen_corpus(const SynthConfig& config);

struct QuerySplit {
  std::vector<QueryRecord> train;
  std::vector<QueryRecord> test;
};

/// One query per sampled document, with that document as the single gold
/// positive. train gets floor(0.8 * num_queries) queries.
QuerySplit gen_queries(const SynthConfig& config, const std::vector<FeatureRecord>& corpus);

/// A synthetic OCR page with its expected assembly computed from the
/// construction grid, independently of the assembly code path.
struct OcrFixture {
  std::string name;
  OcrPage page;
  std::string expected;
};

std::vector<OcrFixture> gen_ocr_fixtures(std::uint64_t seed, std::size_t num_pages);

/// splitmix64 finalizer; used to derive per-record stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace vdistill

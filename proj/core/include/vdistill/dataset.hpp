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

// Corpus and query JSONL files.
//
//   corpus:  {"id", "visual_features": [...], "text_features": [...]?, "text": "..."?}
//   queries: {"id", "features": [...], "positives": [...]?, "answers": [...]?}

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vdistill/encoder.hpp"

namespace vdistill {

struct QueryRecord {
  std::string id;
  std::vector<double> features;
  std::vector<std::string> positives;
  std::vector<std::string> answers;
};

/// (query features, positive document) pair for in-batch training.
struct TrainingPair {
  std::string query_id;
  std::vector<double> query_features;
  FeatureRecord doc;
};

std::vector<FeatureRecord> read_corpus_jsonl(const std::filesystem::path& path);
void write_corpus_jsonl(const std::filesystem::path& path, const std::vector<FeatureRecord>& docs);

std::vector<QueryRecord> read_queries_jsonl(const std::filesystem::path& path);
void write_queries_jsonl(const std::filesystem::path& path,
                         const std::vector<QueryRecord>& queries);

std::string corpus_to_jsonl(const std::vector<FeatureRecord>& docs);
std::string queries_to_jsonl(const std::vector<QueryRecord>& queries);

/// Pairs each query with its first positive. Throws kData when a query has
/// no positive or the positive id is not in the corpus.
std::vector<TrainingPair> make_training_pairs(const std::vector<QueryRecord>& queries,
                                              const std::vector<FeatureRecord>& corpus);

}  // namespace vdistill

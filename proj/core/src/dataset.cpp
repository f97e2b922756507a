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

#include "vdistill/dataset.hpp"

#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json_codec.hpp"

namespace vdistill {
namespace {

using detail::json;

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::istringstream in(detail::read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    fn(detail::parse_json(line, where), where + ": ");
  }
}

std::vector<std::string> string_list(const json& value, const std::string& where) {
  if (!value.is_array()) fail(ErrorKind::kFormat, where + ": expected an array of strings");
  std::vector<std::string> out;
  for (const json& v : value) {
    if (!v.is_string()) fail(ErrorKind::kFormat, where + ": expected an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string id_field(const json& obj, const std::string& where) {
  const json& id = detail::field(obj, "id", where);
  if (!id.is_string() || id.get<std::string>().empty()) {
    fail(ErrorKind::kFormat, where + "id: expected a non-empty string");
  }
  return id.get<std::string>();
}

}  // namespace

std::vector<FeatureRecord> read_corpus_jsonl(const std::filesystem::path& path) {
  std::vector<FeatureRecord> docs;
  std::unordered_set<std::string> seen;
  for_each_line(path, [&](const json& obj, const std::string& where) {
    detail::reject_unknown_keys(obj, {"id", "visual_features", "text_features", "text"}, where);
    FeatureRecord doc;
    doc.id = id_field(obj, where);
    if (!seen.insert(doc.id).second) fail(ErrorKind::kData, where + "duplicate doc id " + doc.id);
    doc.visual_features = detail::real_vector(detail::field(obj, "visual_features", where),
                                              where + "visual_features");
    if (auto it = obj.find("text_features"); it != obj.end() && !it->is_null()) {
      doc.text_features = detail::real_vector(*it, where + "text_features");
    }
    if (auto it = obj.find("text"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) fail(ErrorKind::kFormat, where + "text: expected a string");
      doc.text = it->get<std::string>();
    }
    docs.push_back(std::move(doc));
  });
  return docs;
}

std::string corpus_to_jsonl(const std::vector<FeatureRecord>& docs) {
  std::string out;
  for (const FeatureRecord& doc : docs) {
    json obj = {{"id", doc.id}, {"visual_features", doc.visual_features}};
    if (doc.text_features) obj["text_features"] = *doc.text_features;
    if (doc.text) obj["text"] = *doc.text;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_corpus_jsonl(const std::filesystem::path& path, const std::vector<FeatureRecord>& docs) {
  detail::write_file(path, corpus_to_jsonl(docs));
}

std::vector<QueryRecord> read_queries_jsonl(const std::filesystem::path& path) {
  std::vector<QueryRecord> queries;
  std::unordered_set<std::string> seen;
  for_each_line(path, [&](const json& obj, const std::string& where) {
    detail::reject_unknown_keys(obj, {"id", "features", "positives", "answers"}, where);
    QueryRecord q;
    q.id = id_field(obj, where);
    if (!seen.insert(q.id).second) fail(ErrorKind::kData, where + "duplicate query id " + q.id);
    q.features = detail::real_vector(detail::field(obj, "features", where), where + "features");
    if (auto it = obj.find("positives"); it != obj.end()) {
      q.positives = string_list(*it, where + "positives");
    }
    if (auto it = obj.find("answers"); it != obj.end()) {
      q.answers = string_list(*it, where + "answers");
    }
    queries.push_back(std::move(q));
  });
  return queries;
}

std::string queries_to_jsonl(const std::vector<QueryRecord>& queries) {
  std::string out;
  for (const QueryRecord& q : queries) {
    json obj = {{"id", q.id}, {"features", q.features}};
    if (!q.positives.empty()) obj["positives"] = q.positives;
    if (!q.answers.empty()) obj["answers"] = q.answers;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_queries_jsonl(const std::filesystem::path& path,
                         const std::vector<QueryRecord>& queries) {
  detail::write_file(path, queries_to_jsonl(queries));
}

std::vector<TrainingPair> make_training_pairs(const std::vector<QueryRecord>& queries,
                                              const std::vector<FeatureRecord>& corpus) {
  std::unordered_map<std::string, const FeatureRecord*> by_id;
  for (const FeatureRecord& doc : corpus) by_id.emplace(doc.id, &doc);
  std::vector<TrainingPair> pairs;
  pairs.reserve(queries.size());
  for (const QueryRecord& q : queries) {
    if (q.positives.empty()) fail(ErrorKind::kData, "query " + q.id + " has no positive document");
    auto it = by_id.find(q.positives.front());
    if (it == by_id.end()) {
      fail(ErrorKind::kData,
           "query " + q.id + " names positive " + q.positives.front() + " missing from corpus");
    }
    pairs.push_back(TrainingPair{q.id, q.features, *it->second});
  }
  return pairs;
}

}  // namespace vdistill

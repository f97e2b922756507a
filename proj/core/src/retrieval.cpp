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

#include "vdistill/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "json_codec.hpp"
#include "vdistill/error.hpp"

namespace vdistill {
namespace {

using detail::json;

struct Candidate {
  double score;
  std::size_t row;
};

// Ranking order: higher score first, then ascending doc id.
struct RanksBefore {
  std::span<const std::string> ids;
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.score != b.score) return a.score > b.score;
    return ids[a.row] < ids[b.row];
  }
};

template <typename ScoreFn>
std::vector<Candidate> chunk_topk(std::size_t begin, std::size_t end, std::size_t k,
                                  const RanksBefore& before, ScoreFn&& score) {
  // Max-heap under `before`: the front is the worst kept candidate.
  std::vector<Candidate> heap;
  heap.reserve(k + 1);
  for (std::size_t i = begin; i < end; ++i) {
    const Candidate c{score(i), i};
    if (heap.size() < k) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), before);
    } else if (before(c, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), before);
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end(), before);
    }
  }
  return heap;
}

// Splits [0, n) into `workers` contiguous chunks, runs fn(chunk, begin, end)
// on each (in parallel when workers > 1).
template <typename Fn>
void for_chunks(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  const std::size_t per = (n + workers - 1) / workers;
  if (workers == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * per);
    const std::size_t end = std::min(n, begin + per);
    threads.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
  for (auto& t : threads) t.join();
}

template <typename ScoreFn>
std::vector<RunEntry> ranked_topk(std::span<const std::string> ids, std::size_t k,
                                  std::string_view query_id, std::string_view tag,
                                  std::size_t workers, ScoreFn&& score) {
  require(k >= 1, ErrorKind::kContract, "k must be >= 1");
  const RanksBefore before{ids};
  const std::size_t n = ids.size();
  const std::size_t chunks = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::vector<Candidate>> partial(chunks);
  for_chunks(n, chunks, [&](std::size_t w, std::size_t begin, std::size_t end) {
    partial[w] = chunk_topk(begin, end, k, before, score);
  });
  std::vector<Candidate> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end(), before);
  if (merged.size() > k) merged.resize(k);

  std::vector<RunEntry> run;
  run.reserve(merged.size());
  for (std::size_t r = 0; r < merged.size(); ++r) {
    run.push_back(RunEntry{std::string(query_id), ids[merged[r].row], r + 1, merged[r].score,
                           std::string(tag)});
  }
  return run;
}

double query_norm(const CorpusIndex& index, const EmbeddingVector& query) {
  require(query.dim() == index.dim(), ErrorKind::kContract,
          "query dim " + std::to_string(query.dim()) + " does not match index dim " +
              std::to_string(index.dim()));
  const double n = l2_norm(query.view());
  require(n > 0.0, ErrorKind::kDegenerate, "degenerate query embedding: zero norm");
  return n;
}

inline double cosine_row(const CorpusIndex& index, std::span<const double> q, double qn,
                         std::size_t row) {
  const double c = dot(q, index.embeddings.row(row)) / (qn * index.norms[row]);
  return std::clamp(c, -1.0, 1.0);
}

void check_id_token(const std::string& s, const char* what) {
  require(!s.empty() && s.find_first_of(" \t\r\n") == std::string::npos, ErrorKind::kData,
          std::string(what) + " '" + s + "' must be non-empty and free of whitespace");
}

}  // namespace

std::string to_string(EncoderMode mode) {
  return mode == EncoderMode::kTeacher ? "teacher" : "student";
}

EncoderMode encoder_mode_from_string(const std::string& name) {
  if (name == "teacher" || name == "visual_textual") return EncoderMode::kTeacher;
  if (name == "student" || name == "visual_only") return EncoderMode::kStudent;
  fail(ErrorKind::kConfig, "mode: expected teacher|visual_textual or student|visual_only, got '" +
                               name + "'");
}

CorpusIndex make_index(std::vector<std::string> doc_ids, Matrix embeddings) {
  require(!doc_ids.empty(), ErrorKind::kData, "empty corpus");
  require(embeddings.rows == doc_ids.size(), ErrorKind::kDimension,
          "embedding rows do not match the number of doc ids");
  std::unordered_set<std::string> seen;
  for (const std::string& id : doc_ids) {
    require(seen.insert(id).second, ErrorKind::kData, "duplicate doc id " + id);
  }
  CorpusIndex index;
  index.doc_ids = std::move(doc_ids);
  index.embeddings = std::move(embeddings);
  index.norms.resize(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const double n = l2_norm(index.embeddings.row(i));
    if (!(n > 0.0)) {
      fail(ErrorKind::kDegenerate, "degenerate embedding for doc " + index.doc_ids[i] +
                                       ": zero norm");
    }
    index.norms[i] = n;
  }
  return index;
}

CorpusIndex build_index(std::span<const FeatureRecord> docs, EncoderMode mode,
                        const EncoderParams& doc_encoder) {
  require(!docs.empty(), ErrorKind::kData, "empty corpus");
  if (mode == EncoderMode::kTeacher) {
    std::string missing;
    std::size_t count = 0;
    for (const FeatureRecord& d : docs) {
      if (d.text_features) continue;
      if (count < 20) missing += (count ? ", " : "") + d.id;
      ++count;
    }
    if (count > 0) {
      fail(ErrorKind::kData, "teacher requires text view; " + std::to_string(count) +
                                 " document(s) lack text_features: " + missing +
                                 (count > 20 ? ", ..." : ""));
    }
  }
  Matrix emb(docs.size(), doc_encoder.embedding_dim());
  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const EmbeddingVector e = mode == EncoderMode::kTeacher ? encode_doc_teacher(doc_encoder, docs[i])
                                                           : encode_doc_student(doc_encoder, docs[i]);
    std::copy(e.values.begin(), e.values.end(), emb.row(i).begin());
    ids.push_back(docs[i].id);
  }
  return make_index(std::move(ids), std::move(emb));
}

std::vector<double> score_all(const CorpusIndex& index, const EmbeddingVector& query,
                              std::size_t workers) {
  const double qn = query_norm(index, query);
  std::vector<double> scores(index.size());
  for_chunks(index.size(), workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) scores[i] = cosine_row(index, query.view(), qn, i);
  });
  return scores;
}

std::vector<RunEntry> search_topk(const CorpusIndex& index, const EmbeddingVector& query,
                                  std::size_t k, std::string_view query_id, std::string_view tag,
                                  std::size_t workers) {
  const double qn = query_norm(index, query);
  const auto q = query.view();
  return ranked_topk(index.doc_ids, k, query_id, tag, workers,
                     [&](std::size_t row) { return cosine_row(index, q, qn, row); });
}

std::vector<RunEntry> topk_from_scores(std::span<const std::string> doc_ids,
                                       std::span<const double> scores, std::size_t k,
                                       std::string_view query_id, std::string_view tag,
                                       std::size_t workers) {
  require(doc_ids.size() == scores.size(), ErrorKind::kContract,
          "score list does not cover the corpus");
  return ranked_topk(doc_ids, k, query_id, tag, workers,
                     [&](std::size_t row) { return scores[row]; });
}

std::vector<RunEntry> hybrid_interpolate(std::span<const std::string> doc_ids,
                                         std::span<const double> scores_a,
                                         std::span<const double> scores_b, double alpha,
                                         std::size_t k, std::string_view query_id,
                                         std::string_view tag) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::kConfig, "alpha must lie in [0, 1]");
  require(scores_a.size() == doc_ids.size() && scores_b.size() == doc_ids.size(),
          ErrorKind::kContract, "both score lists must cover the same corpus");
  std::vector<double> fused(doc_ids.size());
  for (std::size_t i = 0; i < fused.size(); ++i) {
    fused[i] = alpha * scores_a[i] + (1.0 - alpha) * scores_b[i];
  }
  return topk_from_scores(doc_ids, fused, k, query_id, tag);
}

std::string to_string(JudgeMode mode) {
  return mode == JudgeMode::kGoldIds ? "gold_ids" : "answer_strings";
}

JudgeMode judge_mode_from_string(const std::string& name) {
  if (name == "gold_ids" || name == "gold") return JudgeMode::kGoldIds;
  if (name == "answer_strings" || name == "answers") return JudgeMode::kAnswerStrings;
  fail(ErrorKind::kConfig, "judge: expected gold_ids or answer_strings, got '" + name + "'");
}

std::string normalize_for_match(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out += ' ';
    in_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  if (in_space && !out.empty()) out += ' ';
  return out;
}

bool judge_relevant(std::string_view doc_id, const std::optional<std::string>& doc_text,
                    const RelevanceJudgment& judgment) {
  if (judgment.mode == JudgeMode::kGoldIds) {
    return judgment.gold_ids.count(std::string(doc_id)) > 0;
  }
  if (!doc_text) {
    fail(ErrorKind::kData, "answer judging needs text for doc " + std::string(doc_id));
  }
  const std::string haystack = normalize_for_match(*doc_text);
  for (const std::string& answer : judgment.answers) {
    std::string needle = normalize_for_match(answer);
    // Leading/trailing whitespace of an answer is not part of the match.
    if (!needle.empty() && needle.front() == ' ') needle.erase(0, 1);
    if (!needle.empty() && needle.back() == ' ') needle.pop_back();
    if (needle.empty()) continue;
    if (haystack.find(needle) != std::string::npos) return true;
  }
  return false;
}

MetricsReport evaluate_run(std::span<const RunEntry> run,
                           const std::map<std::string, RelevanceJudgment>& judgments,
                           const std::map<std::string, std::string>& doc_texts, std::size_t k) {
  require(k >= 1, ErrorKind::kContract, "k must be >= 1");
  std::map<std::string, std::vector<const RunEntry*>> by_query;
  for (const RunEntry& e : run) by_query[e.query_id].push_back(&e);

  MetricsReport report;
  report.k = k;
  report.num_queries = by_query.size();
  if (by_query.empty()) return report;
  double hits = 0.0;
  double rr_sum = 0.0;
  for (auto& [qid, entries] : by_query) {
    auto jt = judgments.find(qid);
    if (jt == judgments.end()) fail(ErrorKind::kData, "query " + qid + " has no relevance judgment");
    std::sort(entries.begin(), entries.end(),
              [](const RunEntry* a, const RunEntry* b) { return a->rank < b->rank; });
    for (const RunEntry* e : entries) {
      if (e->rank > k) break;
      std::optional<std::string> text;
      if (auto it = doc_texts.find(e->doc_id); it != doc_texts.end()) text = it->second;
      if (judge_relevant(e->doc_id, text, jt->second)) {
        hits += 1.0;
        rr_sum += 1.0 / static_cast<double>(e->rank);
        break;
      }
    }
  }
  const double n = static_cast<double>(report.num_queries);
  report.recall_at_k = hits / n;
  report.mrr_at_k = rr_sum / n;
  return report;
}

std::string metrics_to_json(const MetricsReport& report,
                            const std::map<std::string, std::string>& metadata) {
  const std::string suffix = std::to_string(report.k);
  json obj = {
      {"recall_at_" + suffix, report.recall_at_k},
      {"mrr_at_" + suffix, report.mrr_at_k},
      {"k", report.k},
      {"num_queries", report.num_queries},
  };
  if (!metadata.empty()) obj["metadata"] = metadata;
  return obj.dump(2) + "\n";
}

std::string run_to_text(std::span<const RunEntry> run) {
  std::string out;
  char buf[64];
  for (const RunEntry& e : run) {
    check_id_token(e.query_id, "query id");
    check_id_token(e.doc_id, "doc id");
    check_id_token(e.tag, "run tag");
    std::snprintf(buf, sizeof(buf), " %zu %.17g ", e.rank, e.score);
    out += e.query_id;
    out += ' ';
    out += e.doc_id;
    out += buf;
    out += e.tag;
    out += '\n';
  }
  return out;
}

void write_run(const std::filesystem::path& path, std::span<const RunEntry> run) {
  detail::write_file(path, run_to_text(run));
}

std::vector<RunEntry> parse_run(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::vector<RunEntry> run;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    RunEntry e;
    std::string rank, score, extra;
    if (!(fields >> e.query_id >> e.doc_id >> rank >> score >> e.tag) || (fields >> extra)) {
      fail(ErrorKind::kFormat, source + ":" + std::to_string(lineno) +
                                   ": expected 'query_id doc_id rank score tag'");
    }
    char* end = nullptr;
    const unsigned long long r = std::strtoull(rank.c_str(), &end, 10);
    if (*end != '\0' || r == 0) {
      fail(ErrorKind::kFormat, source + ":" + std::to_string(lineno) + ": bad rank '" + rank + "'");
    }
    e.rank = static_cast<std::size_t>(r);
    e.score = std::strtod(score.c_str(), &end);
    if (*end != '\0') {
      fail(ErrorKind::kFormat, source + ":" + std::to_string(lineno) + ": bad score '" + score + "'");
    }
    run.push_back(std::move(e));
  }
  return run;
}

std::vector<RunEntry> read_run(const std::filesystem::path& path) {
  return parse_run(detail::read_file(path), path.string());
}

void save_index(const CorpusIndex& index, EncoderMode mode, const std::filesystem::path& path) {
  json rows = json::array();
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto r = index.embeddings.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  json obj = {{"format_version", detail::kFormatVersion},
              {"mode", to_string(mode)},
              {"doc_ids", index.doc_ids},
              {"embeddings", std::move(rows)}};
  detail::write_file(path, obj.dump() + "\n");
}

CorpusIndex load_index(const std::filesystem::path& path) {
  const json obj = detail::parse_json(detail::read_file(path), path.string());
  const std::string where = path.string() + ": ";
  const json& version = detail::field(obj, "format_version", where);
  if (!version.is_number_integer() || version.get<long long>() != detail::kFormatVersion) {
    fail(ErrorKind::kFormat, where + "format_version: unsupported version " + version.dump());
  }
  const json& ids_json = detail::field(obj, "doc_ids", where);
  const json& rows = detail::field(obj, "embeddings", where);
  if (!ids_json.is_array() || !rows.is_array() || ids_json.size() != rows.size()) {
    fail(ErrorKind::kFormat, where + "doc_ids and embeddings must be arrays of equal length");
  }
  std::vector<std::string> ids;
  for (const json& id : ids_json) {
    if (!id.is_string()) fail(ErrorKind::kFormat, where + "doc_ids: expected strings");
    ids.push_back(id.get<std::string>());
  }
  const std::size_t dim = rows.empty() ? 0 : rows[0].size();
  Matrix emb(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto v = detail::real_vector(rows[i], where + "embeddings");
    if (v.size() != dim) fail(ErrorKind::kFormat, where + "embeddings: ragged rows");
    std::copy(v.begin(), v.end(), emb.row(i).begin());
  }
  return make_index(std::move(ids), std::move(emb));
}

}  // namespace vdistill

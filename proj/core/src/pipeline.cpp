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

#include "vdistill/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "json_codec.hpp"
#include "vdistill/error.hpp"

namespace vdistill {
namespace {

using detail::json;

constexpr std::uint64_t kModelInitStream = 200;

json synth_to_json_value(const SynthConfig& c) {
  return {
      {"num_topics", c.num_topics},     {"corpus_size", c.corpus_size},
      {"num_queries", c.num_queries},   {"visual_dim", c.visual_dim},
      {"text_dim", c.text_dim},         {"query_dim", c.query_dim},
      {"latent_dim", c.latent_dim},     {"doc_spread", c.doc_spread},
      {"visual_noise", c.visual_noise}, {"text_noise", c.text_noise},
      {"query_noise", c.query_noise},   {"regime", to_string(c.regime)},
      {"seed", c.seed},
  };
}

std::size_t positive_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    fail(ErrorKind::kConfig, key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

double number(const json& v, const std::string& key) {
  if (!v.is_number()) fail(ErrorKind::kConfig, key + ": expected a number");
  return v.get<double>();
}

SynthConfig synth_from_json_value(const json& obj, const std::string& where, SynthConfig c) {
  detail::reject_unknown_keys(obj,
                              {"num_topics", "corpus_size", "num_queries", "visual_dim",
                               "text_dim", "query_dim", "latent_dim", "doc_spread",
                               "visual_noise", "text_noise", "query_noise", "regime", "seed"},
                              where);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "num_topics") c.num_topics = positive_count(v, k);
    else if (k == "corpus_size") c.corpus_size = positive_count(v, k);
    else if (k == "num_queries") c.num_queries = positive_count(v, k);
    else if (k == "visual_dim") c.visual_dim = positive_count(v, k);
    else if (k == "text_dim") c.text_dim = positive_count(v, k);
    else if (k == "query_dim") c.query_dim = positive_count(v, k);
    else if (k == "latent_dim") c.latent_dim = positive_count(v, k);
    else if (k == "doc_spread") c.doc_spread = number(v, k);
    else if (k == "visual_noise") c.visual_noise = number(v, k);
    else if (k == "text_noise") c.text_noise = number(v, k);
    else if (k == "query_noise") c.query_noise = number(v, k);
    else if (k == "seed") c.seed = positive_count(v, k);
    else if (k == "regime") {
      if (!v.is_string()) fail(ErrorKind::kConfig, "regime: expected a string");
      c.regime = regime_from_string(v.get<std::string>());
    }
  }
  c.validate();
  return c;
}

json arch_to_json_value(const Architecture& a) {
  return {{"hidden_dims", a.hidden_dims}, {"embedding_dim", a.embedding_dim}};
}

Architecture arch_from_json_value(const json& obj, const std::string& where, Architecture a) {
  detail::reject_unknown_keys(obj, {"hidden_dims", "embedding_dim"}, where);
  if (auto it = obj.find("hidden_dims"); it != obj.end()) {
    if (!it->is_array()) fail(ErrorKind::kConfig, "hidden_dims: expected an array");
    a.hidden_dims.clear();
    for (const json& d : *it) {
      const std::size_t v = positive_count(d, "hidden_dims");
      require(v > 0, ErrorKind::kConfig, "hidden_dims entries must be positive");
      a.hidden_dims.push_back(v);
    }
  }
  if (auto it = obj.find("embedding_dim"); it != obj.end()) {
    a.embedding_dim = positive_count(*it, "embedding_dim");
    require(a.embedding_dim > 0, ErrorKind::kConfig, "embedding_dim must be positive");
  }
  return a;
}

json eval_to_json_value(const EvalSettings& e) {
  return {{"k", e.k},
          {"alpha", e.hybrid_alpha},
          {"workers", e.workers},
          {"judge", to_string(e.judge)}};
}

EvalSettings eval_from_json_value(const json& obj, const std::string& where, EvalSettings e) {
  detail::reject_unknown_keys(obj, {"k", "alpha", "workers", "judge"}, where);
  if (auto it = obj.find("k"); it != obj.end()) e.k = positive_count(*it, "k");
  if (auto it = obj.find("alpha"); it != obj.end()) e.hybrid_alpha = number(*it, "alpha");
  if (auto it = obj.find("workers"); it != obj.end()) e.workers = positive_count(*it, "workers");
  if (auto it = obj.find("judge"); it != obj.end()) {
    if (!it->is_string()) fail(ErrorKind::kConfig, "judge: expected a string");
    e.judge = judge_mode_from_string(it->get<std::string>());
  }
  return e;
}

// Merges a train section over `base` by round-tripping through the flat
// train config reader, which rejects unknown keys.
TrainConfig train_section(const json& obj, const std::string& where, const TrainConfig& base) {
  detail::reject_unknown_keys(obj, train_config_keys(), where);
  json merged = detail::parse_json(train_config_to_json(base), where);
  for (auto it = obj.begin(); it != obj.end(); ++it) merged[it.key()] = it.value();
  return train_config_from_json(merged.dump(), where);
}

json pipeline_to_json_value(const PipelineConfig& c) {
  return {
      {"seed", c.seed},
      {"synth", synth_to_json_value(c.synth)},
      {"architecture", arch_to_json_value(c.arch)},
      {"stage1", detail::parse_json(train_config_to_json(c.stage1), "stage1")},
      {"distill", detail::parse_json(train_config_to_json(c.distill), "distill")},
      {"eval", eval_to_json_value(c.eval)},
  };
}

PipelineConfig pipeline_from_json_value(const json& obj, const std::string& source) {
  detail::reject_unknown_keys(obj, {"seed", "synth", "architecture", "stage1", "distill", "eval"},
                              source);
  std::uint64_t seed = 0;
  if (auto it = obj.find("seed"); it != obj.end()) seed = positive_count(*it, "seed");
  PipelineConfig c = default_pipeline_config(seed);
  if (auto it = obj.find("synth"); it != obj.end()) {
    c.synth = synth_from_json_value(*it, source + " synth", c.synth);
  }
  if (auto it = obj.find("architecture"); it != obj.end()) {
    c.arch = arch_from_json_value(*it, source + " architecture", c.arch);
  }
  if (auto it = obj.find("stage1"); it != obj.end()) {
    c.stage1 = train_section(*it, source + " stage1", c.stage1);
  }
  if (auto it = obj.find("distill"); it != obj.end()) {
    c.distill = train_section(*it, source + " distill", c.distill);
  }
  if (auto it = obj.find("eval"); it != obj.end()) {
    c.eval = eval_from_json_value(*it, source + " eval", c.eval);
  }
  c = c.with_seed(seed);
  c.validate();
  return c;
}

std::string metrics_block(const std::map<std::string, EvaluatedRun>& results, std::uint64_t seed) {
  json obj = json::object();
  for (const auto& [name, r] : results) {
    obj[name] = detail::parse_json(metrics_to_json(r.metrics), name);
  }
  obj["metadata"] = {{"seed", seed}};
  return obj.dump(2) + "\n";
}

}  // namespace

PipelineConfig PipelineConfig::with_seed(std::uint64_t root) const {
  PipelineConfig c = *this;
  c.seed = root;
  c.synth.seed = root;
  c.stage1.seed = root;
  c.distill.seed = root;
  return c;
}

void PipelineConfig::validate() const {
  synth.validate();
  stage1.validate();
  distill.validate();
  require(arch.embedding_dim > 0, ErrorKind::kConfig, "embedding_dim must be positive");
  require(eval.k >= 1, ErrorKind::kConfig, "eval k must be >= 1");
  require(eval.workers >= 1, ErrorKind::kConfig, "eval workers must be >= 1");
  require(eval.hybrid_alpha >= 0.0 && eval.hybrid_alpha <= 1.0, ErrorKind::kConfig,
          "alpha must lie in [0, 1]");
}

PipelineConfig default_pipeline_config(std::uint64_t seed) {
  PipelineConfig c;
  c.synth = synth_preset(Regime::kTextRich, seed);
  c.arch = Architecture{};
  // TrainConfig defaults (2 epochs at 2e-5) barely move freshly initialized encoders.
  c.stage1.learning_rate = 3e-3;
  c.stage1.epochs = 20;
  c.distill.learning_rate = 3e-3;
  c.distill.epochs = 20;
  return c.with_seed(seed);
}

PipelineConfig pipeline_config_from_json(const std::string& text, const std::string& source) {
  const json obj = detail::parse_json(text, source);
  if (!obj.is_object()) fail(ErrorKind::kConfig, source + ": expected a JSON object");
  return pipeline_from_json_value(obj, source);
}

std::string pipeline_config_to_json(const PipelineConfig& config) {
  return pipeline_to_json_value(config).dump(2) + "\n";
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  return pipeline_config_from_json(detail::read_file(path), path.string());
}

void apply_pipeline_override(PipelineConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    fail(ErrorKind::kConfig, "override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json obj = pipeline_to_json_value(config);
  json parsed = json::parse(value, nullptr, false);
  json v = parsed.is_discarded() ? json(value) : parsed;
  const auto dot_pos = key.find('.');
  if (dot_pos == std::string::npos) {
    if (!obj.contains(key) || obj[key].is_object()) {
      fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
    }
    obj[key] = v;
  } else {
    const std::string section = key.substr(0, dot_pos);
    const std::string field = key.substr(dot_pos + 1);
    if (!obj.contains(section) || !obj[section].is_object() || !obj[section].contains(field)) {
      fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
    }
    obj[section][field] = v;
  }
  // Sub-config seeds follow the root seed.
  config = pipeline_from_json_value(obj, "override");
}

SynthConfig synth_config_from_json(const std::string& text, const std::string& source) {
  const json obj = detail::parse_json(text, source);
  return synth_from_json_value(obj, source, SynthConfig{});
}

std::string synth_config_to_json(const SynthConfig& config) {
  return synth_to_json_value(config).dump(2) + "\n";
}

std::map<std::string, RelevanceJudgment> judgments_for(const std::vector<QueryRecord>& queries,
                                                       JudgeMode mode) {
  std::map<std::string, RelevanceJudgment> out;
  for (const QueryRecord& q : queries) {
    RelevanceJudgment j;
    j.mode = mode;
    if (mode == JudgeMode::kGoldIds) {
      require(!q.positives.empty(), ErrorKind::kData, "query " + q.id + " has no gold ids");
      j.gold_ids.insert(q.positives.begin(), q.positives.end());
    } else {
      require(!q.answers.empty(), ErrorKind::kData, "query " + q.id + " has no answers");
      j.answers = q.answers;
    }
    out.emplace(q.id, std::move(j));
  }
  return out;
}

std::map<std::string, std::string> doc_texts(const std::vector<FeatureRecord>& corpus) {
  std::map<std::string, std::string> out;
  for (const FeatureRecord& d : corpus) {
    if (d.text) out.emplace(d.id, *d.text);
  }
  return out;
}

EncoderMode mode_for(const DualEncoder& model) {
  return model.kind == ModelKind::kTeacher ? EncoderMode::kTeacher : EncoderMode::kStudent;
}

std::vector<RunEntry> search_queries(const DualEncoder& model, const CorpusIndex& index,
                                     const std::vector<QueryRecord>& queries, std::size_t k,
                                     const std::string& tag, std::size_t workers) {
  std::vector<RunEntry> run;
  for (const QueryRecord& q : queries) {
    const EmbeddingVector e = encode_query(model.query, q.features);
    auto hits = search_topk(index, e, k, q.id, tag, workers);
    run.insert(run.end(), hits.begin(), hits.end());
  }
  return run;
}

std::vector<RunEntry> hybrid_queries(const DualEncoder& model_a, const CorpusIndex& index_a,
                                     const DualEncoder& model_b, const CorpusIndex& index_b,
                                     const std::vector<QueryRecord>& queries, double alpha,
                                     std::size_t k, const std::string& tag, std::size_t workers) {
  require(index_a.doc_ids == index_b.doc_ids, ErrorKind::kData,
          "hybrid runs need both indexes over the same corpus in the same order");
  std::vector<RunEntry> run;
  for (const QueryRecord& q : queries) {
    const auto a = score_all(index_a, encode_query(model_a.query, q.features), workers);
    const auto b = score_all(index_b, encode_query(model_b.query, q.features), workers);
    auto hits = hybrid_interpolate(index_a.doc_ids, a, b, alpha, k, q.id, tag);
    run.insert(run.end(), hits.begin(), hits.end());
  }
  return run;
}

EvaluatedRun evaluate_model(const DualEncoder& model, const std::vector<FeatureRecord>& corpus,
                            const std::vector<QueryRecord>& queries, const EvalSettings& eval,
                            const std::string& tag) {
  const CorpusIndex index = build_index(corpus, mode_for(model), model.doc);
  EvaluatedRun out;
  out.run = search_queries(model, index, queries, eval.k, tag, eval.workers);
  out.metrics = evaluate_run(out.run, judgments_for(queries, eval.judge), doc_texts(corpus), eval.k);
  return out;
}

double mean_doc_cosine(const DualEncoder& teacher, const DualEncoder& student,
                       const std::vector<FeatureRecord>& docs, std::size_t sample) {
  const std::size_t n = std::min(sample, docs.size());
  require(n > 0, ErrorKind::kContract, "mean_doc_cosine needs at least one document");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += cosine_sim(encode_doc(teacher, docs[i]), encode_doc(student, docs[i]));
  }
  return sum / static_cast<double>(n);
}

Stage1Result run_stage1(const PipelineConfig& config, const std::vector<FeatureRecord>& corpus,
                        const std::vector<QueryRecord>& train_queries) {
  config.validate();
  require(!corpus.empty(), ErrorKind::kData, "empty corpus");
  require(!train_queries.empty(), ErrorKind::kData, "no training queries");
  const FeatureRecord& first = corpus.front();
  require(first.text_features.has_value(), ErrorKind::kData,
          "teacher training requires text_features on " + first.id);
  const std::size_t query_dim = train_queries.front().features.size();
  const std::size_t visual_dim = first.visual_features.size();
  const std::size_t teacher_dim = visual_dim + first.text_features->size();
  const auto pairs = make_training_pairs(train_queries, corpus);

  Stage1Result out;
  out.teacher = train_stage1(
      init_dual_encoder(ModelKind::kTeacher, mix_seed(config.seed, kModelInitStream, 0),
                        query_dim, teacher_dim, config.arch),
      pairs, config.stage1);
  out.student = train_stage1(
      init_dual_encoder(ModelKind::kStudent, mix_seed(config.seed, kModelInitStream, 1),
                        query_dim, visual_dim, config.arch),
      pairs, config.stage1);
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  const SynthConfig& sc = config.synth;
  const auto corpus = gen_corpus(sc);
  const auto split = gen_queries(sc, corpus);
  const auto pairs = make_training_pairs(split.train, corpus);

  PipelineResult res;
  Stage1Result stage1 = run_stage1(config, corpus, split.train);
  res.teacher_run = std::move(stage1.teacher);
  res.student_run = std::move(stage1.student);
  res.teacher = res.teacher_run.params;
  res.student_pre = res.student_run.params;
  res.distill_run = distill(res.teacher, res.student_pre, pairs, config.distill);
  res.student_distilled = res.distill_run.params;

  const EvalSettings& ev = config.eval;
  const CorpusIndex teacher_index = build_index(corpus, EncoderMode::kTeacher, res.teacher.doc);
  const CorpusIndex pre_index = build_index(corpus, EncoderMode::kStudent, res.student_pre.doc);
  const CorpusIndex post_index =
      build_index(corpus, EncoderMode::kStudent, res.student_distilled.doc);
  const auto judgments = judgments_for(split.test, ev.judge);
  const auto texts = doc_texts(corpus);
  auto finish = [&](const std::string& name, std::vector<RunEntry> run) {
    EvaluatedRun er;
    er.metrics = evaluate_run(run, judgments, texts, ev.k);
    er.run = std::move(run);
    res.results.emplace(name, std::move(er));
  };
  finish("teacher", search_queries(res.teacher, teacher_index, split.test, ev.k, "teacher",
                                   ev.workers));
  finish("student_pre", search_queries(res.student_pre, pre_index, split.test, ev.k,
                                       "student_pre", ev.workers));
  finish("student_distilled", search_queries(res.student_distilled, post_index, split.test, ev.k,
                                             "student_distilled", ev.workers));
  finish("hybrid", hybrid_queries(res.teacher, teacher_index, res.student_pre, pre_index,
                                  split.test, ev.hybrid_alpha, ev.k, "hybrid", ev.workers));

  if (out_dir) {
    const auto& dir = *out_dir;
    std::filesystem::create_directories(dir);
    detail::write_file(dir / "config.json", pipeline_config_to_json(config));
    write_corpus_jsonl(dir / "corpus.jsonl", corpus);
    write_queries_jsonl(dir / "queries_train.jsonl", split.train);
    write_queries_jsonl(dir / "queries_test.jsonl", split.test);
    save_checkpoint(res.teacher, config.seed, dir / "teacher.ckpt.json");
    save_checkpoint(res.student_pre, config.seed, dir / "student_pre.ckpt.json");
    save_checkpoint(res.student_distilled, config.seed, dir / "student_distilled.ckpt.json");
    write_loss_csv(res.teacher_run.trace, dir / "loss_teacher.csv");
    write_loss_csv(res.student_run.trace, dir / "loss_student.csv");
    write_loss_csv(res.distill_run.trace, dir / "loss_distill.csv");
    const std::map<std::string, std::string> meta = {{"seed", std::to_string(config.seed)}};
    for (const auto& [name, r] : res.results) {
      write_run(dir / ("run_" + name + ".txt"), r.run);
      detail::write_file(dir / ("metrics_" + name + ".json"), metrics_to_json(r.metrics, meta));
    }
    detail::write_file(dir / "metrics.json", metrics_block(res.results, config.seed));
  }
  return res;
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v = {"full", "no_reweight", "no_align", "no_soft",
                                             "no_distill"};
  return v;
}

std::vector<AblationRow> run_ablation(const PipelineConfig& base,
                                      const std::vector<std::uint64_t>& seeds) {
  require(!seeds.empty(), ErrorKind::kConfig, "ablation needs at least one seed");
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    const PipelineConfig config = base.with_seed(seed);
    config.validate();
    const SynthConfig& sc = config.synth;
    const auto corpus = gen_corpus(sc);
    const auto split = gen_queries(sc, corpus);
    const auto pairs = make_training_pairs(split.train, corpus);
    const Stage1Result stage1 = run_stage1(config, corpus, split.train);
    const DualEncoder& teacher = stage1.teacher.params;
    const DualEncoder& student = stage1.student.params;

    for (const std::string& variant : ablation_variants()) {
      DualEncoder model = student;
      if (variant != "no_distill") {
        TrainConfig dc = config.distill;
        dc.use_reweight = variant == "full";
        dc.use_align = variant != "no_align";
        dc.use_soft = variant != "no_soft";
        model = distill(teacher, student, pairs, dc).params;
      }
      const EvaluatedRun er = evaluate_model(model, corpus, split.test, config.eval, variant);
      rows.push_back(AblationRow{variant, seed, er.metrics});
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,seed,recall_at_k,mrr_at_k,k\n";
  char buf[256];
  for (const AblationRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%llu,%.17g,%.17g,%zu\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.seed), r.metrics.recall_at_k,
                  r.metrics.mrr_at_k, r.metrics.k);
    out += buf;
  }
  return out;
}

}  // namespace vdistill

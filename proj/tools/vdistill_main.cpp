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


// vdistill command-line tool. Every subcommand reads the same sectioned
// JSON config (see --help of each subcommand) and writes plain files.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vdistill/dataset.hpp"
#include "vdistill/error.hpp"
#include "vdistill/io.hpp"
#include "vdistill/layout.hpp"
#include "vdistill/pipeline.hpp"
#include "vdistill/retrieval.hpp"
#include "vdistill/synthdata.hpp"
#include "vdistill/trainer.hpp"
#include "vdistill/version.hpp"

namespace fs = std::filesystem;
using namespace vdistill;

namespace {

constexpr int kUsageExit = 2;
constexpr int kInternalExit = 1;

const char* kExitCodes =
    "Exit status:\n"
    "  0   success\n"
    "  1   internal error\n"
    "  2   usage error (unknown subcommand or option)\n"
    "  3   config: invalid value or unknown config key\n"
    "  4   io: missing or unwritable file\n"
    "  5   format: malformed or unsupported file contents\n"
    "  6   dimension: vector or matrix shape mismatch\n"
    "  7   data: inconsistent input records\n"
    "  8   numerical: non-finite loss during training\n"
    "  9   degenerate: zero-norm embedding\n"
    "  10  contract: violated precondition\n"
    "Errors are printed to stderr as one line: error: <kind>: <message>";

struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("-c,--config", args.path, "Pipeline config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--set", args.sets, "Override, e.g. stage1.epochs=5 (repeatable)");
  cmd->add_option("--seed", args.seed, "Root seed; overrides the config seed");
}

PipelineConfig resolve_config(const ConfigArgs& args) {
  PipelineConfig c = args.path.empty() ? default_pipeline_config(0) : load_pipeline_config(args.path);
  for (const std::string& s : args.sets) apply_pipeline_override(c, s);
  if (args.seed) c = c.with_seed(*args.seed);
  c.validate();
  return c;
}

DualEncoder load_kind(const fs::path& path, ModelKind expected) {
  DualEncoder m = load_checkpoint(path);
  require(m.kind == expected, ErrorKind::kData,
          path.string() + ": expected a " + to_string(expected) + " checkpoint, found " +
              to_string(m.kind));
  return m;
}

void write_or_print(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    write_text_file(out, text);
  }
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  ConfigArgs config;
  std::string out;
  std::size_t ocr_pages = 0;
};

void cmd_synth(const SynthArgs& a) {
  const PipelineConfig c = resolve_config(a.config);
  const fs::path dir = a.out;
  const auto corpus = gen_corpus(c.synth);
  const auto split = gen_queries(c.synth, corpus);
  write_corpus_jsonl(dir / "corpus.jsonl", corpus);
  write_queries_jsonl(dir / "queries_train.jsonl", split.train);
  write_queries_jsonl(dir / "queries_test.jsonl", split.test);
  write_text_file(dir / "config.json", pipeline_config_to_json(c));
  if (a.ocr_pages > 0) {
    const auto fixtures = gen_ocr_fixtures(c.seed, a.ocr_pages);
    std::vector<OcrPage> pages;
    std::string expected;
    for (const OcrFixture& f : fixtures) {
      pages.push_back(f.page);
      expected += nlohmann::json{{"page_id", f.page.page_id}, {"name", f.name}, {"text", f.expected}}
                      .dump() +
                  "\n";
    }
    write_ocr_jsonl(dir / "ocr_pages.jsonl", pages);
    write_text_file(dir / "ocr_expected.jsonl", expected);
  }
}

// --- train / distill -----------------------------------------------------

struct TrainArgs {
  ConfigArgs config;
  std::string corpus;
  std::string queries;
  std::string out;
};

void cmd_train(const TrainArgs& a) {
  const PipelineConfig c = resolve_config(a.config);
  const auto corpus = read_corpus_jsonl(a.corpus);
  const auto queries = read_queries_jsonl(a.queries);
  const Stage1Result r = run_stage1(c, corpus, queries);
  const fs::path dir = a.out;
  save_checkpoint(r.teacher.params, c.seed, dir / "teacher.ckpt.json");
  save_checkpoint(r.student.params, c.seed, dir / "student_pre.ckpt.json");
  write_loss_csv(r.teacher.trace, dir / "loss_teacher.csv");
  write_loss_csv(r.student.trace, dir / "loss_student.csv");
}

struct DistillArgs {
  ConfigArgs config;
  std::string teacher;
  std::string student;
  std::string corpus;
  std::string queries;
  std::string out;
};

void cmd_distill(const DistillArgs& a) {
  const PipelineConfig c = resolve_config(a.config);
  const DualEncoder teacher = load_kind(a.teacher, ModelKind::kTeacher);
  const DualEncoder student = load_kind(a.student, ModelKind::kStudent);
  const auto corpus = read_corpus_jsonl(a.corpus);
  const auto queries = read_queries_jsonl(a.queries);
  const TrainingRun run = distill(teacher, student, make_training_pairs(queries, corpus), c.distill);
  const fs::path dir = a.out;
  save_checkpoint(run.params, c.seed, dir / "student_distilled.ckpt.json");
  write_loss_csv(run.trace, dir / "loss_distill.csv");
}

// --- index / search ------------------------------------------------------

struct IndexArgs {
  std::string checkpoint;
  std::string corpus;
  std::string mode;
  std::string out;
};

void cmd_index(const IndexArgs& a) {
  const DualEncoder model = load_checkpoint(a.checkpoint);
  const EncoderMode mode = a.mode.empty() ? mode_for(model) : encoder_mode_from_string(a.mode);
  require(mode == mode_for(model), ErrorKind::kData,
          "mode " + to_string(mode) + " does not match the " + to_string(model.kind) +
              " checkpoint " + a.checkpoint);
  const auto corpus = read_corpus_jsonl(a.corpus);
  save_index(build_index(corpus, mode, model.doc), mode, a.out);
}

struct SearchArgs {
  ConfigArgs config;
  std::string checkpoint;
  std::string index;
  std::string queries;
  std::string out;
  std::string tag = "run";
  std::optional<std::size_t> k;
  std::optional<std::size_t> workers;
  std::string hybrid_checkpoint;
  std::string hybrid_index;
  std::optional<double> alpha;
};

void cmd_search(const SearchArgs& a) {
  const PipelineConfig c = resolve_config(a.config);
  const std::size_t k = a.k.value_or(c.eval.k);
  const std::size_t workers = a.workers.value_or(c.eval.workers);
  require(k > 0, ErrorKind::kConfig, "k must be positive");
  require(workers > 0, ErrorKind::kConfig, "workers must be positive");
  const DualEncoder model = load_checkpoint(a.checkpoint);
  const CorpusIndex index = load_index(a.index);
  const auto queries = read_queries_jsonl(a.queries);

  std::vector<RunEntry> run;
  if (a.hybrid_checkpoint.empty() != a.hybrid_index.empty()) {
    fail(ErrorKind::kConfig, "--hybrid-checkpoint and --hybrid-index go together");
  }
  if (!a.hybrid_checkpoint.empty()) {
    const DualEncoder other = load_checkpoint(a.hybrid_checkpoint);
    const CorpusIndex other_index = load_index(a.hybrid_index);
    run = hybrid_queries(model, index, other, other_index, queries,
                         a.alpha.value_or(c.eval.hybrid_alpha), k, a.tag, workers);
  } else {
    require(!a.alpha, ErrorKind::kConfig, "--alpha needs --hybrid-checkpoint");
    run = search_queries(model, index, queries, k, a.tag, workers);
  }
  write_or_print(a.out, run_to_text(run));
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
  ConfigArgs config;
  std::string run;
  std::string queries;
  std::string corpus;
  std::string out;
  std::optional<std::size_t> k;
  std::string judge;
};

void cmd_eval(const EvalArgs& a) {
  const PipelineConfig c = resolve_config(a.config);
  const std::size_t k = a.k.value_or(c.eval.k);
  require(k > 0, ErrorKind::kConfig, "k must be positive");
  const JudgeMode judge = a.judge.empty() ? c.eval.judge : judge_mode_from_string(a.judge);
  const auto run = read_run(a.run);
  const auto queries = read_queries_jsonl(a.queries);
  std::map<std::string, std::string> texts;
  if (!a.corpus.empty()) texts = doc_texts(read_corpus_jsonl(a.corpus));
  require(judge != JudgeMode::kAnswerStrings || !a.corpus.empty(), ErrorKind::kConfig,
          "answer_strings judging needs --corpus for document text");
  const MetricsReport report = evaluate_run(run, judgments_for(queries, judge), texts, k);
  const std::map<std::string, std::string> meta = {
      {"run", fs::path(a.run).filename().string()}, {"judge", to_string(judge)}};
  write_or_print(a.out, metrics_to_json(report, meta));
}

// --- ablate / pipeline / assemble-ocr -----------------------------------

struct AblateArgs {
  ConfigArgs config;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string out;
};

void cmd_ablate(const AblateArgs& a) {
  const PipelineConfig c = resolve_config(a.config);
  write_or_print(a.out, ablation_csv(run_ablation(c, a.seeds)));
}

struct PipelineArgs {
  ConfigArgs config;
  std::string out;
};

void cmd_pipeline(const PipelineArgs& a) {
  const PipelineConfig c = resolve_config(a.config);
  const PipelineResult r = run_pipeline(c, fs::path(a.out));
  for (const auto& [name, er] : r.results) {
    std::printf("%-18s recall@%zu %.4f  mrr@%zu %.4f\n", name.c_str(), er.metrics.k,
                er.metrics.recall_at_k, er.metrics.k, er.metrics.mrr_at_k);
  }
}

struct OcrArgs {
  std::string input;
  std::string out;
  double threshold = kDefaultConfidenceThreshold;
};

void cmd_assemble_ocr(const OcrArgs& a) {
  std::string out;
  for (const OcrPage& page : read_ocr_jsonl(a.input)) {
    out += nlohmann::json{{"page_id", page.page_id}, {"text", assemble_page(page, a.threshold)}}
               .dump() +
           "\n";
  }
  write_or_print(a.out, out);
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vdistill: train, distill and evaluate visual-only document retrievers"};
  app.set_version_flag("--version", std::string("vdistill ") + kVersion);
  app.footer(kExitCodes);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus and query splits");
  add_config_options(c_synth, synth.config);
  c_synth->add_option("-o,--out", synth.out, "Output directory")->required();
  c_synth->add_option("--ocr-pages", synth.ocr_pages, "Also write N OCR fixture pages");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Stage 1: train teacher and student independently");
  add_config_options(c_train, train.config);
  c_train->add_option("--corpus", train.corpus, "Corpus JSONL")->required();
  c_train->add_option("--queries", train.queries, "Training queries JSONL")->required();
  c_train->add_option("-o,--out", train.out, "Output directory")->required();

  DistillArgs dist;
  auto* c_dist = app.add_subcommand("distill", "Stage 2: distill the teacher into the student");
  add_config_options(c_dist, dist.config);
  c_dist->add_option("--teacher", dist.teacher, "Teacher checkpoint")->required();
  c_dist->add_option("--student", dist.student, "Student checkpoint")->required();
  c_dist->add_option("--corpus", dist.corpus, "Corpus JSONL")->required();
  c_dist->add_option("--queries", dist.queries, "Training queries JSONL")->required();
  c_dist->add_option("-o,--out", dist.out, "Output directory")->required();

  IndexArgs idx;
  auto* c_index = app.add_subcommand("index", "Embed a corpus into a search index");
  c_index->add_option("--checkpoint", idx.checkpoint, "Model checkpoint")->required();
  c_index->add_option("--corpus", idx.corpus, "Corpus JSONL")->required();
  c_index->add_option("--mode", idx.mode,
                      "visual_textual or visual_only (default: from the checkpoint)");
  c_index->add_option("-o,--out", idx.out, "Index file")->required();

  SearchArgs search;
  auto* c_search = app.add_subcommand("search", "Exact top-k search, optionally hybrid");
  add_config_options(c_search, search.config);
  c_search->add_option("--checkpoint", search.checkpoint, "Query-side checkpoint")->required();
  c_search->add_option("--index", search.index, "Index built with the same checkpoint")
      ->required();
  c_search->add_option("--queries", search.queries, "Queries JSONL")->required();
  c_search->add_option("-k", search.k, "Results per query (default: eval.k)");
  c_search->add_option("--workers", search.workers, "Scan threads (default: eval.workers)");
  c_search->add_option("--tag", search.tag, "Run tag written in the last column");
  c_search->add_option("--hybrid-checkpoint", search.hybrid_checkpoint, "Second model");
  c_search->add_option("--hybrid-index", search.hybrid_index, "Second model's index");
  c_search->add_option("--alpha", search.alpha, "Weight of the first model (default: eval.alpha)");
  c_search->add_option("-o,--out", search.out, "Run file (default: stdout)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Recall@k and MRR@k of a run file");
  add_config_options(c_eval, ev.config);
  c_eval->add_option("--run", ev.run, "Run file")->required();
  c_eval->add_option("--queries", ev.queries, "Queries JSONL with positives or answers")
      ->required();
  c_eval->add_option("--corpus", ev.corpus, "Corpus JSONL (document text for answer judging)");
  c_eval->add_option("-k", ev.k, "Cutoff (default: eval.k)");
  c_eval->add_option("--judge", ev.judge, "gold_ids or answer_strings (default: eval.judge)");
  c_eval->add_option("-o,--out", ev.out, "Metrics JSON (default: stdout)");

  AblateArgs abl;
  auto* c_abl = app.add_subcommand("ablate", "Distillation ablation table over seeds");
  add_config_options(c_abl, abl.config);
  c_abl->add_option("--seeds", abl.seeds, "Seeds (default: 0 1 2 3 4)")->delimiter(',');
  c_abl->add_option("-o,--out", abl.out, "CSV file (default: stdout)");

  OcrArgs ocr;
  auto* c_ocr = app.add_subcommand("assemble-ocr", "Layout-preserving text from OCR boxes");
  c_ocr->add_option("--input", ocr.input, "OCR pages JSONL")->required();
  c_ocr->add_option("--threshold", ocr.threshold, "Keep boxes with confidence above this");
  c_ocr->add_option("-o,--out", ocr.out, "JSONL of {page_id, text} (default: stdout)");

  PipelineArgs pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "Synthesize, train, distill and evaluate");
  add_config_options(c_pipe, pipe.config);
  c_pipe->add_option("-o,--out", pipe.out, "Output directory")->required();

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    bool known = false;
    for (const CLI::App* sub : app.get_subcommands({})) known = known || sub->get_name() == name;
    if (!known) {
      std::fprintf(stderr, "error: usage: unknown subcommand '%s'\n", name.c_str());
      return kUsageExit;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: usage: %s\n", one_line(e.what()).c_str());
    return kUsageExit;
  }

  try {
    if (c_synth->parsed()) cmd_synth(synth);
    else if (c_train->parsed()) cmd_train(train);
    else if (c_dist->parsed()) cmd_distill(dist);
    else if (c_index->parsed()) cmd_index(idx);
    else if (c_search->parsed()) cmd_search(search);
    else if (c_eval->parsed()) cmd_eval(ev);
    else if (c_abl->parsed()) cmd_ablate(abl);
    else if (c_ocr->parsed()) cmd_assemble_ocr(ocr);
    else if (c_pipe->parsed()) cmd_pipeline(pipe);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.kind())).c_str(),
                 one_line(e.what()).c_str());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: io: %s\n", one_line(e.what()).c_str());
    return exit_code(ErrorKind::kIo);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", one_line(e.what()).c_str());
    return kInternalExit;
  }
  return 0;
}

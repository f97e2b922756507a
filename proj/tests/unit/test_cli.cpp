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


#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>

#include <gtest/gtest.h>

#include "support.hpp"
#include "vdistill/io.hpp"
#include "vdistill/pipeline.hpp"

namespace vdistill {
namespace {

using testing::TempDir;

struct Result {
  int status = -1;
  std::string output;  // stdout and stderr interleaved
};

Result run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + VDISTILL_CLI_PATH + "' " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.output += buf.data();
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

const std::string kSmall =
    " --set synth.corpus_size=200 --set synth.num_queries=100 --set synth.num_topics=20"
    " --set stage1.epochs=3 --set distill.epochs=2";

TEST(Cli, VersionAndHelp) {
  const Result v = run_cli("--version");
  EXPECT_EQ(v.status, 0);
  EXPECT_NE(v.output.find("vdistill "), std::string::npos);
  const Result h = run_cli("--help");
  EXPECT_EQ(h.status, 0);
  EXPECT_NE(h.output.find("Exit status"), std::string::npos);
  EXPECT_NE(h.output.find("assemble-ocr"), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const Result r = run_cli("frobnicate");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("frobnicate"), std::string::npos);
}

TEST(Cli, UnknownConfigKeyIsNamed) {
  TempDir dir("cli_key");
  const Result r = run_cli("synth -o " + q(dir.path()) + " --set synth.bogus_knob=3");
  EXPECT_EQ(r.status, 3);
  EXPECT_NE(r.output.find("synth.bogus_knob"), std::string::npos);

  write_text_file(dir / "cfg.json", R"({"stage1": {"learnig_rate": 0.1}})");
  const Result f = run_cli("synth -o " + q(dir / "out") + " -c " + q(dir / "cfg.json"));
  EXPECT_EQ(f.status, 3);
  EXPECT_NE(f.output.find("learnig_rate"), std::string::npos);
}

TEST(Cli, MissingFileIsIoError) {
  TempDir dir("cli_io");
  const Result r = run_cli("assemble-ocr --input " + q(dir / "absent.jsonl"));
  EXPECT_EQ(r.status, 4);
  EXPECT_EQ(r.output.rfind("error: io:", 0), 0u) << r.output;
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 1);
}

TEST(Cli, MalformedFileIsFormatError) {
  TempDir dir("cli_fmt");
  write_text_file(dir / "bad.ckpt.json", "{\"format_version\": 1, \"mod");
  const Result r = run_cli("index --checkpoint " + q(dir / "bad.ckpt.json") + " --corpus " +
                           q(dir / "bad.ckpt.json") + " -o " + q(dir / "i.json"));
  EXPECT_EQ(r.status, 5) << r.output;
}

TEST(Cli, AssembleOcrMatchesGoldenText) {
  const auto data = std::filesystem::path(VDISTILL_TEST_DATA_DIR) / "ocr";
  const Result r = run_cli("assemble-ocr --input " + q(data / "two_lines_basic.jsonl"));
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find(R"("text":"Invoice   No. 42\nTotal:  12.50\n")"), std::string::npos)
      << r.output;
}

TEST(Cli, StageByStageWorkflow) {
  TempDir dir("cli_flow");
  const std::string d = q(dir.path());
  ASSERT_EQ(run_cli("synth -o " + d + kSmall + " --ocr-pages 4").status, 0);
  for (const char* f : {"corpus.jsonl", "queries_train.jsonl", "queries_test.jsonl",
                        "config.json", "ocr_pages.jsonl", "ocr_expected.jsonl"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const std::string corpus = " --corpus " + q(dir / "corpus.jsonl");
  const std::string train_q = " --queries " + q(dir / "queries_train.jsonl");
  const std::string test_q = " --queries " + q(dir / "queries_test.jsonl");
  const std::string cfg = " -c " + q(dir / "config.json");

  Result r = run_cli("train" + cfg + corpus + train_q + " -o " + d);
  ASSERT_EQ(r.status, 0) << r.output;
  r = run_cli("distill" + cfg + " --teacher " + q(dir / "teacher.ckpt.json") + " --student " +
              q(dir / "student_pre.ckpt.json") + corpus + train_q + " -o " + d);
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "loss_distill.csv"));

  // Teacher and student swapped: the checkpoint kinds are checked.
  r = run_cli("distill" + cfg + " --teacher " + q(dir / "student_pre.ckpt.json") + " --student " +
              q(dir / "teacher.ckpt.json") + corpus + train_q + " -o " + q(dir / "x"));
  EXPECT_EQ(r.status, 7) << r.output;

  for (const char* model : {"teacher", "student_distilled", "student_pre"}) {
    const std::string ckpt = q(dir / (std::string(model) + ".ckpt.json"));
    const std::string index = q(dir / (std::string(model) + ".index.json"));
    r = run_cli("index --checkpoint " + ckpt + corpus + " -o " + index);
    ASSERT_EQ(r.status, 0) << model << r.output;
    r = run_cli("search" + cfg + " --checkpoint " + ckpt + " --index " + index + test_q +
                " --tag " + model + " -o " + q(dir / (std::string("run_") + model + ".txt")));
    ASSERT_EQ(r.status, 0) << model << r.output;
  }
  r = run_cli("search" + cfg + " --checkpoint " + q(dir / "teacher.ckpt.json") + " --index " +
              q(dir / "teacher.index.json") + " --hybrid-checkpoint " +
              q(dir / "student_pre.ckpt.json") + " --hybrid-index " +
              q(dir / "student_pre.index.json") + test_q + " --alpha 1 --tag teacher -o " +
              q(dir / "run_hybrid1.txt"));
  ASSERT_EQ(r.status, 0) << r.output;
  const auto teacher_run = read_run(dir / "run_teacher.txt");
  const auto hybrid_run = read_run(dir / "run_hybrid1.txt");
  ASSERT_EQ(teacher_run.size(), hybrid_run.size());
  for (std::size_t i = 0; i < teacher_run.size(); ++i) {
    EXPECT_EQ(teacher_run[i].doc_id, hybrid_run[i].doc_id);
  }

  r = run_cli("eval --run " + q(dir / "run_teacher.txt") + test_q + " -k 10");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("\"k\": 10"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("recall_at_10"), std::string::npos) << r.output;

  r = run_cli("eval --run " + q(dir / "run_teacher.txt") + test_q + " --judge answer_strings");
  EXPECT_EQ(r.status, 3) << r.output;
}

TEST(Cli, CommandsAreIdempotent) {
  TempDir a("cli_idem_a");
  TempDir b("cli_idem_b");
  ASSERT_EQ(run_cli("synth --seed 5 -o " + q(a.path()) + kSmall).status, 0);
  ASSERT_EQ(run_cli("synth --seed 5 -o " + q(b.path()) + kSmall).status, 0);
  for (const char* f : {"corpus.jsonl", "queries_train.jsonl", "queries_test.jsonl"}) {
    EXPECT_EQ(read_text_file(a / f), read_text_file(b / f)) << f;
  }
  const std::string before = read_text_file(a / "corpus.jsonl");
  const std::string args = " --corpus " + q(a / "corpus.jsonl") + " --queries " +
                           q(a / "queries_train.jsonl") + " --seed 5" + kSmall;
  ASSERT_EQ(run_cli("train -o " + q(a / "t1") + args).status, 0);
  ASSERT_EQ(run_cli("train -o " + q(a / "t2") + args).status, 0);
  EXPECT_EQ(read_text_file(a / "t1" / "teacher.ckpt.json"),
            read_text_file(a / "t2" / "teacher.ckpt.json"));
  EXPECT_EQ(read_text_file(a / "corpus.jsonl"), before);
}

TEST(Cli, AblateShape) {
  TempDir dir("cli_abl");
  const Result r = run_cli("ablate --seeds 0,1 -o " + q(dir / "abl.csv") + kSmall);
  ASSERT_EQ(r.status, 0) << r.output;
  const std::string csv = read_text_file(dir / "abl.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}

}  // namespace
}  // namespace vdistill

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

#include "vdistill/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "vdistill/error.hpp"

namespace vdistill {
namespace {

// Stream ids for mix_seed.
enum Stream : std::uint64_t {
  kCenters = 1,
  kDocLatent = 2,
  kProjections = 3,
  kVisualNoise = 4,
  kTextNoise = 5,
  kQueryPick = 6,
  kQueryNoise = 7,
  kOcrPage = 8,
};

std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return std::mt19937_64(mix_seed(seed, stream, index));
}

void fill_normal(std::span<double> out, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : out) v = stddev * dist(rng);
}

// y = P x + noise * N(0, I)
std::vector<double> noisy_projection(const Matrix& proj, std::span<const double> x, double noise,
                                     std::mt19937_64& rng) {
  std::vector<double> y(proj.rows);
  for (std::size_t r = 0; r < proj.rows; ++r) y[r] = dot(proj.row(r), x);
  if (noise > 0.0) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : y) v += noise * dist(rng);
  }
  return y;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL) ^ (index * 0xD1B54A32D192ED03ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string to_string(Regime regime) {
  return regime == Regime::kTextRich ? "text_rich" : "visual_rich";
}

Regime regime_from_string(const std::string& name) {
  if (name == "text_rich") return Regime::kTextRich;
  if (name == "visual_rich") return Regime::kVisualRich;
  fail(ErrorKind::kConfig, "regime: expected text_rich or visual_rich, got '" + name + "'");
}

void SynthConfig::validate() const {
  require(num_topics > 0 && corpus_size > 0 && num_queries > 0, ErrorKind::kConfig,
          "num_topics, corpus_size and num_queries must be positive");
  require(visual_dim > 0 && text_dim > 0 && query_dim > 0 && latent_dim > 0, ErrorKind::kConfig,
          "feature dimensions must be positive");
  require(corpus_size >= num_topics, ErrorKind::kConfig, "corpus_size must be >= num_topics");
  for (double v : {doc_spread, visual_noise, text_noise, query_noise}) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::kConfig,
            "noise and spread values must be finite and >= 0");
  }
  if (regime == Regime::kTextRich) {
    require(text_noise <= visual_noise, ErrorKind::kConfig,
            "text_rich regime needs text_noise <= visual_noise");
  } else {
    require(visual_noise <= text_noise, ErrorKind::kConfig,
            "visual_rich regime needs visual_noise <= text_noise");
  }
}

SynthConfig synth_preset(Regime regime, std::uint64_t seed) {
  SynthConfig config;
  config.regime = regime;
  config.seed = seed;
  if (regime == Regime::kVisualRich) std::swap(config.visual_noise, config.text_noise);
  return config;
}

SynthLatents gen_latents(const SynthConfig& config) {
  config.validate();
  SynthLatents out;
  const std::size_t ld = config.latent_dim;
  out.topic_centers = Matrix(config.num_topics, ld);
  for (std::size_t t = 0; t < config.num_topics; ++t) {
    auto rng = stream_rng(config.seed, kCenters, t);
    fill_normal(out.topic_centers.row(t), rng, 1.0);
  }
  out.doc_latents = Matrix(config.corpus_size, ld);
  for (std::size_t d = 0; d < config.corpus_size; ++d) {
    auto rng = stream_rng(config.seed, kDocLatent, d);
    auto row = out.doc_latents.row(d);
    fill_normal(row, rng, config.doc_spread);
    auto center = out.topic_centers.row(d % config.num_topics);
    for (std::size_t k = 0; k < ld; ++k) row[k] += center[k];
  }
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(ld));
  auto make_proj = [&](std::size_t rows, std::uint64_t which) {
    Matrix m(rows, ld);
    auto rng = stream_rng(config.seed, kProjections, which);
    fill_normal(m.data, rng, proj_std);
    return m;
  };
  out.visual_proj = make_proj(config.visual_dim, 0);
  out.text_proj = make_proj(config.text_dim, 1);
  out.query_proj = make_proj(config.query_dim, 2);
  return out;
}

std::string synth_doc_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "d%06zu", index);
  return buf;
}

std::vector<FeatureRecord> gen_corpus(const SynthConfig& config) {
  const SynthLatents lat = gen_latents(config);
  std::vector<FeatureRecord> docs(config.corpus_size);
  for (std::size_t d = 0; d < config.corpus_size; ++d) {
    FeatureRecord& doc = docs[d];
    doc.id = synth_doc_id(d);
    auto vrng = stream_rng(config.seed, kVisualNoise, d);
    auto trng = stream_rng(config.seed, kTextNoise, d);
    doc.visual_features = noisy_projection(lat.visual_proj, lat.doc_latents.row(d),
                                           config.visual_noise, vrng);
    doc.text_features = noisy_projection(lat.text_proj, lat.doc_latents.row(d),
                                         config.text_noise, trng);
    doc.text = "synthetic page " + doc.id + " topic " + std::to_string(d % config.num_topics);
  }
  return docs;
}

QuerySplit gen_queries(const SynthConfig& config, const std::vector<FeatureRecord>& corpus) {
  const SynthLatents lat = gen_latents(config);
  require(corpus.size() == config.corpus_size, ErrorKind::kData,
          "corpus size does not match the synthetic config");

  // Sampled documents: a seeded permutation when there are enough documents,
  // otherwise independent draws.
  std::vector<std::size_t> picks;
  auto pick_rng = stream_rng(config.seed, kQueryPick, 0);
  if (config.num_queries <= config.corpus_size) {
    std::vector<std::size_t> perm(config.corpus_size);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), pick_rng);
    picks.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(config.num_queries));
  } else {
    std::uniform_int_distribution<std::size_t> dist(0, config.corpus_size - 1);
    for (std::size_t i = 0; i < config.num_queries; ++i) picks.push_back(dist(pick_rng));
  }

  const std::size_t ld = config.latent_dim;
  std::vector<QueryRecord> all;
  for (std::size_t i = 0; i < config.num_queries; ++i) {
    const std::size_t d = picks[i];
    auto rng = stream_rng(config.seed, kQueryNoise, i);
    std::vector<double> z(lat.doc_latents.row(d).begin(), lat.doc_latents.row(d).end());
    std::vector<double> eps(ld);
    fill_normal(eps, rng, config.query_noise);
    for (std::size_t k = 0; k < ld; ++k) z[k] += eps[k];
    QueryRecord q;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "q%06zu", i);
    q.id = buf;
    q.features = noisy_projection(lat.query_proj, z, 0.0, rng);
    q.positives = {corpus[d].id};
    q.answers = {"page " + corpus[d].id};
    all.push_back(std::move(q));
  }
  // Picks are already a random order, so the split is a prefix.
  const std::size_t train_size = config.num_queries * 4 / 5;
  QuerySplit split;
  split.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(train_size));
  split.test.assign(all.begin() + static_cast<std::ptrdiff_t>(train_size), all.end());
  return split;
}

namespace {

// Hand-walked pages that lead every fixture set.
struct NamedPage {
  const char* name;
  double width;
  double height;
  std::vector<OcrBox> boxes;
  const char* expected;
};

const std::vector<NamedPage>& named_pages() {
  static const std::vector<NamedPage> pages = {
      {"two_lines_basic", 400, 200,
       {{10, 10, 80, 30, "Invoice", 0.95},
        {110, 10, 170, 30, "No. 42", 0.88},
        {10, 40, 70, 60, "Total:", 0.9},
        {90, 40, 140, 60, "12.50", 0.97}},
       "Invoice   No. 42\nTotal:  12.50\n"},
      {"confidence_boundary", 300, 200,
       {{10, 10, 50, 30, "Name", 0.61},
        {60, 10, 120, 30, "SECRET", 0.6},
        {130, 10, 180, 30, "Alice", 1.0},
        {10, 100, 60, 120, "noise", 0.59},
        {10, 130, 40, 150, "End", 0.9}},
       "Name        Alice\n\n\n\nEnd\n"},
      {"staircase", 200, 100,
       {{10, 10, 40, 30, "aaa", 0.9},
        {60, 18, 90, 38, "bbb", 0.9},
        {10, 30, 40, 50, "ccc", 0.9},
        {60, 38, 90, 58, "ddd", 0.9}},
       "aaa  bbb\nccc  ddd\n"},
  };
  return pages;
}

OcrFixture grid_fixture(std::uint64_t seed, std::size_t p) {
  static constexpr const char* kWords[] = {
      "total", "invoice", "date",  "amount", "qty", "x",     "page",  "summary", "due",
      "paid",  "ref",     "notes", "a",      "tax", "12.50", "2024", "id",      "name"};
  auto rng = stream_rng(seed, kOcrPage, p);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  // All boxes share one char width and height, so the medians are exact
  // and every gap is a whole number of cells.
  const double cw = static_cast<double>(uniform(3, 6) * 2);
  const double lh = static_cast<double>(uniform(6, 10) * 2);
  const double margin = 20.0;

  OcrFixture fx;
  fx.name = "synthetic_" + std::to_string(seed) + "_" + std::to_string(p);
  fx.page.page_id = fx.name;

  struct Row {
    std::size_t row_index;
    std::vector<std::pair<int, std::string>> kept;  // (cells before word, word)
  };
  std::vector<Row> rows;
  std::size_t row_index = 0;
  const int num_rows = uniform(1, 6);
  bool any_kept = false;
  double max_x = 0.0;
  for (int r = 0; r < num_rows; ++r) {
    if (r > 0) row_index += 1 + static_cast<std::size_t>(uniform(0, 5));
    const double y0 = margin + static_cast<double>(row_index) * lh;
    Row row{row_index, {}};
    int cells_since_kept = 0;
    double x = margin + static_cast<double>(uniform(0, 4)) * cw;
    const int num_words = uniform(1, 5);
    for (int w = 0; w < num_words; ++w) {
      if (w > 0) {
        const int gap = uniform(1, 6);
        x += gap * cw;
        cells_since_kept += gap;
      }
      const std::string word = kWords[uniform(0, static_cast<int>(std::size(kWords)) - 1)];
      const int len = static_cast<int>(word.size());
      OcrBox box{x, y0, x + len * cw, y0 + lh, word, 0.0};
      const int roll = uniform(0, 9);
      const bool drop = roll < 2;
      if (drop) {
        box.confidence = roll == 0 ? 0.6 : static_cast<double>(uniform(0, 55)) / 100.0;
        cells_since_kept += len;
      } else {
        box.confidence = static_cast<double>(uniform(61, 100)) / 100.0;
        row.kept.emplace_back(row.kept.empty() ? 0 : cells_since_kept, word);
        cells_since_kept = 0;
        any_kept = true;
      }
      x += len * cw;
      max_x = std::max(max_x, x);
      fx.page.boxes.push_back(std::move(box));
    }
    rows.push_back(std::move(row));
  }
  if (!any_kept) {
    // Guarantee at least one retained box on a fresh row.
    row_index += 1;
    const double y0 = margin + static_cast<double>(row_index) * lh;
    fx.page.boxes.push_back(OcrBox{margin, y0, margin + 4 * cw, y0 + lh, "page", 0.9});
    max_x = std::max(max_x, margin + 4 * cw);
    rows.push_back(Row{row_index, {{0, "page"}}});
  }
  fx.page.width = max_x + margin;
  fx.page.height = margin * 2 + static_cast<double>(row_index + 1) * lh;
  std::shuffle(fx.page.boxes.begin(), fx.page.boxes.end(), rng);

  // Expected text straight from the grid.
  std::string expected;
  bool first = true;
  std::size_t prev_row = 0;
  for (const Row& row : rows) {
    if (row.kept.empty()) continue;
    if (!first) {
      const std::size_t blank = row.row_index - prev_row - 1;
      expected.append(1 + std::min<std::size_t>(3, blank), '\n');
    }
    for (std::size_t i = 0; i < row.kept.size(); ++i) {
      if (i > 0) expected.append(static_cast<std::size_t>(row.kept[i].first), ' ');
      expected += row.kept[i].second;
    }
    prev_row = row.row_index;
    first = false;
  }
  expected += '\n';
  fx.expected = std::move(expected);
  return fx;
}

}  // namespace


std::vector<OcrFixture> gen_ocr_fixtures(std::uint64_t seed, std::size_t num_pages) {
  require(num_pages >= 1, ErrorKind::kConfig, "num_pages must be >= 1");
  std::vector<OcrFixture> fixtures;
  const auto& named = named_pages();
  for (std::size_t p = 0; p < std::min(num_pages, named.size()); ++p) {
    auto rng = stream_rng(seed, kOcrPage, p);
    OcrFixture fx;
    fx.name = named[p].name;
    fx.page = OcrPage{fx.name, named[p].width, named[p].height, named[p].boxes};
    std::shuffle(fx.page.boxes.begin(), fx.page.boxes.end(), rng);
    fx.expected = named[p].expected;
    fixtures.push_back(std::move(fx));
  }
  for (std::size_t p = named.size(); p < num_pages; ++p) {
    fixtures.push_back(grid_fixture(seed, p));
  }
  return fixtures;
}

}  // namespace vdistill

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


#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "vdistill/layout.hpp"
#include "vdistill/retrieval.hpp"
#include "vdistill/synthdata.hpp"

namespace {

using namespace vdistill;

CorpusIndex random_index(std::size_t docs, std::size_t dim) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  Matrix m(docs, dim);
  for (double& v : m.data) v = normal(rng);
  std::vector<std::string> ids(docs);
  for (std::size_t i = 0; i < docs; ++i) ids[i] = "doc" + std::to_string(i);
  return make_index(std::move(ids), std::move(m));
}

EmbeddingVector random_query(std::size_t dim) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  EmbeddingVector q{std::vector<double>(dim)};
  for (double& v : q.values) v = normal(rng);
  return q;
}

// args: corpus size, workers
void BM_SearchTop10(benchmark::State& state) {
  const auto docs = static_cast<std::size_t>(state.range(0));
  const auto workers = static_cast<std::size_t>(state.range(1));
  const CorpusIndex index = random_index(docs, 128);
  const EmbeddingVector q = random_query(128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(search_topk(index, q, 10, "q", "bench", workers));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(docs));
}
BENCHMARK(BM_SearchTop10)
    ->Args({10000, 1})
    ->Args({100000, 1})
    ->Args({100000, 4})
    ->Args({1000000, 8})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

void BM_HybridInterpolate(benchmark::State& state) {
  const auto docs = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::string> ids(docs);
  std::vector<double> a(docs), b(docs);
  for (std::size_t i = 0; i < docs; ++i) {
    ids[i] = "doc" + std::to_string(i);
    a[i] = u(rng);
    b[i] = u(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(hybrid_interpolate(ids, a, b, 0.5, 10, "q", "hybrid"));
  }
}
BENCHMARK(BM_HybridInterpolate)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);

void BM_AssemblePage(benchmark::State& state) {
  const auto fixtures = gen_ocr_fixtures(0, 32);
  for (auto _ : state) {
    for (const auto& f : fixtures) benchmark::DoNotOptimize(assemble_page(f.page));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fixtures.size()));
}
BENCHMARK(BM_AssemblePage);

}  // namespace

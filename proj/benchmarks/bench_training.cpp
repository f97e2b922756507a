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
#include <vector>

#include <benchmark/benchmark.h>

#include "vdistill/encoder.hpp"
#include "vdistill/losses.hpp"
#include "vdistill/trainer.hpp"

namespace {

using namespace vdistill;

std::vector<EmbeddingVector> random_embeddings(std::mt19937_64& rng, std::size_t n,
                                               std::size_t dim) {
  std::normal_distribution<double> normal;
  std::vector<EmbeddingVector> out(n, EmbeddingVector{std::vector<double>(dim)});
  for (auto& e : out) {
    for (double& v : e.values) v = normal(rng);
  }
  return out;
}

// arg: batch size; embeddings are 32-d
void BM_InBatchInfoNce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto q = random_embeddings(rng, n, 32);
  const auto d = random_embeddings(rng, n, 32);
  for (auto _ : state) benchmark::DoNotOptimize(in_batch_infonce(q, d));
}
BENCHMARK(BM_InBatchInfoNce)->Arg(16)->Arg(64);

void BM_DistillLossAndGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  DistillBatch batch{random_embeddings(rng, n, 32), random_embeddings(rng, n, 32),
                     random_embeddings(rng, n, 32), random_embeddings(rng, n, 32)};
  const DistillOptions options;
  for (auto _ : state) {
    benchmark::DoNotOptimize(total_distill_loss(batch, options));
    benchmark::DoNotOptimize(grad_total_distill_loss(batch, options));
  }
}
BENCHMARK(BM_DistillLossAndGradient)->Arg(16)->Arg(64);

void BM_EncoderForwardBackward(benchmark::State& state) {
  const std::vector<std::size_t> dims = {64, 64, 32};
  const EncoderParams params = init_params(3, dims);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<double> x(64), g(32);
  for (double& v : x) v = normal(rng);
  for (double& v : g) v = normal(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(params, x));
    benchmark::DoNotOptimize(encoder_backward(params, x, g));
  }
}
BENCHMARK(BM_EncoderForwardBackward);

void BM_AdamStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> params(n, 0.1), grads(n, 0.01);
  AdamState adam;
  TrainConfig config;
  for (auto _ : state) {
    optimizer_step(params, grads, adam, config);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_AdamStep)->Arg(4096);

}  // namespace

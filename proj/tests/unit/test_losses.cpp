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


#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "frozen_values.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "vdistill/losses.hpp"

namespace vdistill {
namespace {

using testing::ev;
using testing::throws_kind;

using Rows = std::vector<std::vector<double>>;

std::vector<EmbeddingVector> embed(const Rows& rows) {
  std::vector<EmbeddingVector> out;
  for (const auto& r : rows) out.push_back(ev(r));
  return out;
}

DistillBatch batch_of(const Rows& tq, const Rows& td, const Rows& sq, const Rows& sd) {
  return DistillBatch{embed(tq), embed(td), embed(sq), embed(sd)};
}

Rows random_rows(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  Rows r;
  for (std::size_t i = 0; i < n; ++i) r.push_back(testing::gaussian_vector(rng, dim));
  return r;
}

std::vector<double> concat(const Rows& a, const Rows& b) {
  std::vector<double> out;
  for (const auto& r : a) out.insert(out.end(), r.begin(), r.end());
  for (const auto& r : b) out.insert(out.end(), r.begin(), r.end());
  return out;
}

// Inverse of concat for two blocks of n rows each.
std::pair<Rows, Rows> split(const std::vector<double>& flat, std::size_t n, std::size_t dim) {
  Rows a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i].assign(flat.begin() + static_cast<long>(i * dim), flat.begin() + static_cast<long>((i + 1) * dim));
    b[i].assign(flat.begin() + static_cast<long>((n + i) * dim),
                flat.begin() + static_cast<long>((n + i + 1) * dim));
  }
  return {a, b};
}

TEST(Cosine, KnownValues) {
  EXPECT_EQ(cosine_sim(ev({3, 4}), ev({3, 4})), 1.0);
  EXPECT_EQ(cosine_sim(ev({1, 0}), ev({0, 1})), 0.0);
  EXPECT_NEAR(cosine_sim(ev({1, 0}), ev({1, 1})), testing::kCosOneZeroOneOne, 2.3e-16);
}

TEST(Cosine, ZeroNormIsDegenerate) {
  EXPECT_TRUE(throws_kind([] { cosine_sim(ev({0, 0}), ev({1, 0})); }, ErrorKind::kDegenerate));
  EXPECT_TRUE(throws_kind([] { cosine_sim(ev({1, 0}), ev({0, 0})); }, ErrorKind::kDegenerate));
}

TEST(Cosine, ScaleInvariantAndBounded) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto q = testing::gaussian_vector(rng, 7);
    const auto d = testing::gaussian_vector(rng, 7);
    std::vector<double> q2 = q, d2 = d;
    for (double& v : q2) v *= 3.5;
    for (double& v : d2) v *= 0.25;
    const double c = cosine_sim(ev(q), ev(d));
    EXPECT_NEAR(cosine_sim(ev(q2), ev(d2)), c, 1e-14);
    EXPECT_LE(std::abs(c), 1.0);
  }
}

TEST(Cosine, DimensionMismatch) {
  EXPECT_TRUE(throws_kind([] { cosine_sim(ev({1, 0}), ev({1, 0, 0})); }, ErrorKind::kDimension));
}

TEST(InfoNce, UniformSimilaritiesGiveLogK) {
  const std::size_t pos[] = {2};
  EXPECT_NEAR(infonce_loss(SimilarityRow{{0.3, 0.3, 0.3, 0.3}, 0}, pos), testing::kLn4, 1e-12);
}

TEST(InfoNce, OneHotSimilarities) {
  const std::size_t pos[] = {0};
  EXPECT_NEAR(infonce_loss(SimilarityRow{{1, 0, 0, 0}, 0}, pos), testing::kInfoNceOneHot, 1e-15);
}

TEST(InfoNce, SingleCandidateIsZero) {
  const std::size_t pos[] = {0};
  EXPECT_EQ(infonce_loss(SimilarityRow{{0.42}, 0}, pos), 0.0);
}

TEST(InfoNce, DecreasesAsPositiveImproves) {
  const std::size_t pos[] = {1};
  double prev = infonce_loss(SimilarityRow{{0.2, -0.9, 0.4}, 0}, pos);
  for (double s = -0.8; s <= 1.0; s += 0.1) {
    const double cur = infonce_loss(SimilarityRow{{0.2, s, 0.4}, 0}, pos);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(InfoNce, InBatchGradientMatchesCentralDifferences) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 7);
    const std::size_t dim = 2 + static_cast<std::size_t>((trial * 5) % 15);
    const Rows q = random_rows(rng, n, dim), d = random_rows(rng, n, dim);
    const auto loss = in_batch_infonce(embed(q), embed(d));
    EXPECT_NEAR(loss.value, testing::straightline_in_batch_infonce(q, d), 1e-12);
    auto f = [&](const std::vector<double>& x) {
      const auto [qq, dd] = split(x, n, dim);
      return testing::straightline_in_batch_infonce(qq, dd);
    };
    const auto numeric = testing::central_gradient(f, concat(q, d));
    const auto analytic = concat(loss.d_queries, loss.d_docs);
    EXPECT_LT(testing::max_relative_error(analytic, numeric), 1e-5) << "n=" << n << " dim=" << dim;
  }
}

TEST(Align, KnownValueAndZero) {
  const std::vector<EmbeddingVector> td = {ev({1, 1})}, sd = {ev({0, 0})};
  const std::vector<EmbeddingVector> q = {ev({0.5, 0.5})};
  EXPECT_EQ(align_loss(td, sd, q, q), 2.0);
  EXPECT_EQ(align_loss(td, td, q, q), 0.0);
}

TEST(Align, HomogeneousOfDegreeTwo) {
  std::mt19937_64 rng(4);
  const Rows td = random_rows(rng, 5, 6), sd = random_rows(rng, 5, 6);
  const Rows tq = random_rows(rng, 5, 6), sq = random_rows(rng, 5, 6);
  const double base = align_loss(embed(td), embed(sd), embed(tq), embed(sq));
  // Scaling both sides by 2 doubles every difference exactly.
  auto twice = [](Rows r) {
    for (auto& row : r) {
      for (double& v : row) v *= 2.0;
    }
    return r;
  };
  EXPECT_EQ(align_loss(embed(twice(td)), embed(twice(sd)), embed(twice(tq)), embed(twice(sq))),
            4.0 * base);
}

TEST(Align, LengthMismatchIsContractError) {
  const std::vector<EmbeddingVector> one = {ev({1.0})}, two = {ev({1.0}), ev({2.0})};
  EXPECT_TRUE(throws_kind([&] { align_loss(one, two, one, one); }, ErrorKind::kContract));
}

TEST(SoftLabels, EqualSimilaritiesAreUniform) {
  for (double tau : {0.05, 1.0, 7.0}) {
    const auto d = soft_distribution(SimilarityRow{{0.1, 0.1, 0.1, 0.1, 0.1}, 0}, tau);
    for (double p : d.probs) EXPECT_NEAR(p, 0.2, 1e-15);
  }
}

TEST(SoftLabels, KnownSoftmax) {
  const auto d = soft_distribution(SimilarityRow{{1, 2, 3}, 0}, 1.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(d.probs[i], testing::kSoftmax123[i], 1e-15);
  const auto h = soft_distribution(SimilarityRow{{0, 0.6931471806}, 0}, 1.0);
  EXPECT_NEAR(h.probs[0], 1.0 / 3.0, 1e-10);
  EXPECT_NEAR(h.probs[1], 2.0 / 3.0, 1e-10);
}

TEST(SoftLabels, PositiveNormalizedShiftInvariant) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    auto sims = testing::gaussian_vector(rng, 9, 0.5);
    const auto a = soft_distribution(SimilarityRow{sims, 0}, 0.3);
    for (double& s : sims) s += 0.25;
    const auto b = soft_distribution(SimilarityRow{sims, 0}, 0.3);
    double sum = 0.0;
    for (std::size_t k = 0; k < sims.size(); ++k) {
      EXPECT_GT(a.probs[k], 0.0);
      EXPECT_NEAR(a.probs[k], b.probs[k], 1e-14);
      sum += a.probs[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(SoftLabels, RejectsNonPositiveTemperature) {
  EXPECT_TRUE(throws_kind([] { soft_distribution(SimilarityRow{{1, 2}, 0}, 0.0); },
                          ErrorKind::kConfig));
}

TEST(Kl, KnownValues) {
  const SoftLabelDistribution t{{0.2, 0.3, 0.5}, 1.0};
  EXPECT_EQ(kl_divergence(t, t), 0.0);
  EXPECT_NEAR(kl_divergence({{1.0, 0.0}, 1.0}, {{0.5, 0.5}, 1.0}), testing::kLn2, 1e-15);
}

TEST(Kl, NonNegativeOnRandomDraws) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 500; ++i) {
    const auto t = soft_distribution(SimilarityRow{testing::gaussian_vector(rng, 6), 0}, 0.7);
    const auto s = soft_distribution(SimilarityRow{testing::gaussian_vector(rng, 6), 0}, 0.7);
    EXPECT_GE(kl_divergence(t, s), 0.0);
  }
}

TEST(Kl, FloorKeepsPeakedSelfDivergenceAtZero) {
  // tau 0.05 over cosines in [-1, 1] pushes most entries far below 1e-12.
  const SimilarityRow row{{1.0, -1.0, 0.2, -0.5, 0.9, -0.95}, 0};
  const auto t = soft_distribution(row, 0.05);
  EXPECT_LT(t.probs[1], 1e-12);
  EXPECT_EQ(kl_divergence(t, t), 0.0);
}

TEST(Kl, ZeroStudentProbabilityIsFinite) {
  const double kl = kl_divergence({{0.5, 0.5}, 1.0}, {{1.0, 0.0}, 1.0});
  EXPECT_TRUE(std::isfinite(kl));
  EXPECT_NEAR(kl, 0.5 * std::log(0.5) + 0.5 * std::log(0.5 / 1e-12), 1e-12);
}

TEST(AdaptiveWeights, EqualKlIsUniform) {
  const std::vector<double> kl(4, 0.37);
  for (double w : adaptive_weights(kl, 1.0)) EXPECT_NEAR(w, 0.25, 1e-15);
}

TEST(AdaptiveWeights, KnownValue) {
  const auto w = adaptive_weights(std::vector<double>{testing::kLn2, 0.0}, 1.0);
  EXPECT_NEAR(w[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(w[1], 1.0 / 3.0, 1e-15);
}

TEST(AdaptiveWeights, FlattenAsTemperatureGrows) {
  double prev = 1.0;
  for (double tau : {1.0, 10.0, 100.0}) {
    const auto w = adaptive_weights(std::vector<double>{5.0, 0.0}, tau);
    EXPECT_LT(w[0], prev);
    EXPECT_GT(w[0], 0.5);
    prev = w[0];
  }
  EXPECT_NEAR(prev, 0.5, 0.02);
}

TEST(AdaptiveWeights, SumToOneAndMonotone) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> kl(8);
    for (double& v : kl) v = u(rng);
    const auto w = adaptive_weights(kl, 0.8);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-9);
    for (std::size_t a = 0; a < kl.size(); ++a) {
      for (std::size_t b = 0; b < kl.size(); ++b) {
        if (kl[a] > kl[b]) EXPECT_GT(w[a], w[b]);
      }
    }
  }
}

TEST(AdaptiveWeights, RejectsNegativeKl) {
  EXPECT_TRUE(throws_kind([] { adaptive_weights(std::vector<double>{-0.1, 0.2}, 1.0); },
                          ErrorKind::kContract));
}

TEST(TotalLoss, IdenticalEmbeddingsGiveExactZero) {
  std::mt19937_64 rng(21);
  const Rows q = random_rows(rng, 6, 5), d = random_rows(rng, 6, 5);
  const auto b = batch_of(q, d, q, d);
  const LossBreakdown l = total_distill_loss(b, DistillOptions{});
  EXPECT_EQ(l.total, 0.0);
  EXPECT_EQ(l.align, 0.0);
  EXPECT_EQ(l.soft, 0.0);
  const auto g = grad_total_distill_loss(b, DistillOptions{});
  for (const auto& row : g.student_queries) {
    for (double v : row) EXPECT_EQ(v, 0.0);
  }
  for (const auto& row : g.student_docs) {
    for (double v : row) EXPECT_EQ(v, 0.0);
  }
}

TEST(TotalLoss, MisalignedInstanceGetsMoreWeight) {
  const Rows tq = {{1, 0}, {0, 1}}, td = {{1, 0.1}, {0.1, 1}};
  // Only instance 1's query moves, so instance 0's row is unchanged.
  const Rows sq = {{1, 0}, {1, 0.3}}, sd = td;
  const LossBreakdown l = total_distill_loss(batch_of(tq, td, sq, sd), DistillOptions{});
  EXPECT_GT(l.weights[1], 0.5);
  EXPECT_NEAR(l.weights[0] + l.weights[1], 1.0, 1e-12);
}

void check_frozen_total(const Rows& tq, const Rows& td, const Rows& sq, const Rows& sd,
                        double tau_soft, double tau_weight, double want) {
  DistillOptions o;
  o.tau_soft = tau_soft;
  o.tau_weight = tau_weight;
  const LossBreakdown l = total_distill_loss(batch_of(tq, td, sq, sd), o);
  EXPECT_NEAR(l.total, want, 1e-12 * std::max(1.0, std::abs(want)));
  // The breakdown's total is the weighted sum of the per-instance terms.
  const auto terms = testing::straightline_terms(tq, td, sq, sd, tau_soft);
  double sum = 0.0;
  for (std::size_t i = 0; i < tq.size(); ++i) sum += l.weights[i] * (terms.align[i] + terms.kl[i]);
  EXPECT_NEAR(l.total, sum, 1e-9);
}

TEST(TotalLoss, MatchesHighPrecisionReference) {
  using namespace testing;
  check_frozen_total(kDistill4x8TeacherQueries, kDistill4x8TeacherDocs, kDistill4x8StudentQueries,
                     kDistill4x8StudentDocs, kDistill4x8TauSoft, kDistill4x8TauWeight,
                     kDistill4x8Total);
  check_frozen_total(kDistill4x8WarmTeacherQueries, kDistill4x8WarmTeacherDocs,
                     kDistill4x8WarmStudentQueries, kDistill4x8WarmStudentDocs,
                     kDistill4x8WarmTauSoft, kDistill4x8WarmTauWeight, kDistill4x8WarmTotal);
}

TEST(TotalLoss, NonNegativeOnRandomBatches) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const auto b = batch_of(random_rows(rng, 5, 4), random_rows(rng, 5, 4), random_rows(rng, 5, 4),
                            random_rows(rng, 5, 4));
    const LossBreakdown l = total_distill_loss(b, DistillOptions{});
    EXPECT_GE(l.total, 0.0);
    EXPECT_NEAR(std::accumulate(l.weights.begin(), l.weights.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(TotalLoss, InconsistentBatchIsContractError) {
  std::mt19937_64 rng(1);
  auto b = batch_of(random_rows(rng, 3, 4), random_rows(rng, 3, 4), random_rows(rng, 3, 4),
                    random_rows(rng, 2, 4));
  EXPECT_TRUE(throws_kind([&] { total_distill_loss(b, DistillOptions{}); }, ErrorKind::kContract));
}

// Gradient of sum_i w_i (align_i + KL_i) with the weights frozen at the
// evaluation point, against central differences of the straight-line terms.
TEST(TotalLoss, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3, dim = 6;
    const Rows tq = random_rows(rng, n, dim), td = random_rows(rng, n, dim);
    const Rows sq = random_rows(rng, n, dim), sd = random_rows(rng, n, dim);
    DistillOptions o;
    o.tau_soft = trial % 2 == 0 ? 1.0 : 0.3;
    o.tau_weight = trial % 3 == 0 ? 0.5 : 1.0;
    const auto b = batch_of(tq, td, sq, sd);
    const auto w = total_distill_loss(b, o).weights;
    auto f = [&](const std::vector<double>& x) {
      const auto [qq, dd] = split(x, n, dim);
      const auto terms = testing::straightline_terms(tq, td, qq, dd, o.tau_soft);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += w[i] * (terms.align[i] + terms.kl[i]);
      return s;
    };
    const auto numeric = testing::central_gradient(f, concat(sq, sd));
    const auto g = grad_total_distill_loss(b, o);
    const auto analytic = concat(g.student_queries, g.student_docs);
    EXPECT_LT(testing::max_relative_error(analytic, numeric), 1e-5) << "trial " << trial;
  }
}

TEST(TotalLoss, GradientOfLibraryTotalWithUniformWeights) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 6);
    const std::size_t dim = 3 + static_cast<std::size_t>(trial % 9);
    const Rows tq = random_rows(rng, n, dim), td = random_rows(rng, n, dim);
    const Rows sq = random_rows(rng, n, dim), sd = random_rows(rng, n, dim);
    DistillOptions o;
    o.use_reweight = false;
    o.include_hard = trial % 2 == 1;
    o.align_normalized = trial % 4 == 2;
    auto f = [&](const std::vector<double>& x) {
      const auto [qq, dd] = split(x, n, dim);
      return total_distill_loss(batch_of(tq, td, qq, dd), o).total;
    };
    const auto numeric = testing::central_gradient(f, concat(sq, sd));
    const auto g = grad_total_distill_loss(batch_of(tq, td, sq, sd), o);
    EXPECT_LT(testing::max_relative_error(concat(g.student_queries, g.student_docs), numeric), 1e-5)
        << "trial " << trial;
  }
}

TEST(TotalLoss, ComponentSwitches) {
  std::mt19937_64 rng(7);
  const auto b = batch_of(random_rows(rng, 4, 3), random_rows(rng, 4, 3), random_rows(rng, 4, 3),
                          random_rows(rng, 4, 3));
  DistillOptions no_align;
  no_align.use_align = false;
  no_align.use_reweight = false;
  DistillOptions no_soft = no_align;
  no_soft.use_align = true;
  no_soft.use_soft = false;
  const LossBreakdown a = total_distill_loss(b, no_align);
  const LossBreakdown s = total_distill_loss(b, no_soft);
  EXPECT_NEAR(a.total, a.soft, 1e-12);
  EXPECT_NEAR(s.total, s.align, 1e-12);
}

}  // namespace
}  // namespace vdistill

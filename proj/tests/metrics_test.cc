// Copyright 2026 The ERG Authors.
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

#include "oracles.hpp"

#include <gtest/gtest.h>

namespace erg::metrics {
namespace {

using testing::oracle::random_partition;

void expect_prf(const PRF& got, double p, double r, double f, double tol) {
  EXPECT_NEAR(got.precision, p, tol);
  EXPECT_NEAR(got.recall, r, tol);
  EXPECT_NEAR(got.f1, f, tol);
}

TEST(BinaryPrf, AllConspiracyOnTestSplit) {
  std::vector<int> gold(1581 + 5095, 0);
  std::fill(gold.begin(), gold.begin() + 1581, 1);
  const std::vector<int> preds(gold.size(), 1);
  const PRF s = binary_prf(preds, gold, 1);
  EXPECT_DOUBLE_EQ(round2(s.precision), 23.68);
  EXPECT_DOUBLE_EQ(round2(s.recall), 100.0);
  // Harmonic mean at full precision is 38.2948.
  EXPECT_DOUBLE_EQ(round2(s.f1), 38.29);
  EXPECT_NEAR(s.f1, 38.30, 0.01);
}

TEST(BinaryPrf, HandCountedCase) {
  const PRF s = binary_prf(std::vector<int>{1, 0, 1, 1},
                           std::vector<int>{1, 1, 0, 1}, 1);
  expect_prf(s, 200.0 / 3, 200.0 / 3, 200.0 / 3, 1e-12);
  EXPECT_FALSE(s.degenerate);
}

TEST(BinaryPrf, SwappingRolesSwapsPrecisionAndRecall) {
  nn::Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> a(1 + rng.index(30)), b(a.size());
    for (auto& x : a) x = static_cast<int>(rng.index(2));
    for (auto& x : b) x = static_cast<int>(rng.index(2));
    const PRF ab = binary_prf(a, b, 1), ba = binary_prf(b, a, 1);
    EXPECT_DOUBLE_EQ(ab.precision, ba.recall);
    EXPECT_DOUBLE_EQ(ab.recall, ba.precision);
    EXPECT_NEAR(ab.f1, ba.f1, 1e-12);
  }
}

TEST(BinaryPrf, BadInputs) {
  EXPECT_THROW(binary_prf(std::vector<int>{1}, std::vector<int>{1, 0}, 1),
               std::invalid_argument);
  EXPECT_THROW(binary_prf(std::vector<int>{}, std::vector<int>{}, 1),
               std::invalid_argument);
  const PRF none = binary_prf(std::vector<int>{0, 0}, std::vector<int>{0, 0}, 1);
  EXPECT_TRUE(none.degenerate);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(MacroPrf, PerfectAndHalf) {
  const std::vector<int> classes{0, 1};
  expect_prf(macro_prf(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 1},
                       classes),
             100, 100, 100, 1e-12);
  // Predict everything 1 on gold (0, 1): class 1 P=50 R=100, class 0 P=0 R=0.
  const PRF s = macro_prf(std::vector<int>{1, 1}, std::vector<int>{0, 1},
                          classes);
  expect_prf(s, 25.0, 50.0, (0.0 + 200.0 / 3) / 2, 1e-12);
}

TEST(MacroPrf, MatchesOracleOnRandomLabels) {
  nn::Rng rng(32);
  const std::vector<int> classes{0, 1, 2};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> p(1 + rng.index(25)), g(p.size());
    for (auto& x : p) x = static_cast<int>(rng.index(3));
    for (auto& x : g) x = static_cast<int>(rng.index(3));
    const auto [op, orr, of] = testing::oracle::macro(p, g, 3);
    expect_prf(macro_prf(p, g, classes), op, orr, of, 1e-9);
  }
}

TEST(Coref, HandCountedMuc) {
  // Gold {a, b, c}; predicted {a, b}, {c}.
  const PRF s = muc({{0, 1}, {2}}, {{0, 1, 2}});
  expect_prf(s, 100.0, 50.0, 200.0 / 3, 1e-12);
}

TEST(Coref, HandCountedB3AndCeaf) {
  const EntityPartition pred{{0, 1}, {2}}, gold{{0, 1, 2}};
  // B3: P = 1, R = (2/3 + 2/3 + 1/3) / 3 = 5/9.
  expect_prf(b_cubed(pred, gold), 100.0, 500.0 / 9,
             100.0 * f1_of(1.0, 5.0 / 9), 1e-12);
  // CEAF_e: best phi4 = 2*2/(3+2) = 0.8; P = 0.8/2, R = 0.8/1.
  expect_prf(ceaf_e(pred, gold), 40.0, 80.0, 100.0 * f1_of(0.4, 0.8), 1e-12);
}

TEST(Coref, IdenticalPartitionsScorePerfect) {
  const EntityPartition p{{0, 3}, {1}, {2, 4, 5}};
  const CorefScores s = coref_score(p, p);
  for (const PRF* m : {&s.muc, &s.b3, &s.ceaf_e, &s.blanc})
    expect_prf(*m, 100, 100, 100, 1e-12);
}

TEST(Coref, MatchesBruteForceOracles) {
  nn::Rng rng(33);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(6);
    const EntityPartition pred = random_partition(n, rng);
    const EntityPartition gold = random_partition(n, rng);
    const CorefScores s = coref_score(pred, gold);
    const auto m = testing::oracle::muc(pred, gold);
    const auto b = testing::oracle::b_cubed(pred, gold);
    const auto c = testing::oracle::ceaf_e(pred, gold);
    const auto l = testing::oracle::blanc(pred, gold);
    expect_prf(s.muc, m[0], m[1], m[2], 1e-9);
    expect_prf(s.b3, b[0], b[1], b[2], 1e-9);
    expect_prf(s.ceaf_e, c[0], c[1], c[2], 1e-9);
    expect_prf(s.blanc, l[0], l[1], l[2], 1e-9);
  }
}

TEST(Coref, HungarianMatchesExhaustiveSearch) {
  nn::Rng rng(34);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t rows = 1 + rng.index(6), cols = 1 + rng.index(6);
    std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
    for (auto& r : w)
      for (double& x : r) x = rng.uniform();
    const auto assign = max_weight_assignment(w);
    double got = 0.0;
    std::set<long> used;
    for (std::size_t i = 0; i < rows; ++i)
      if (assign[i] >= 0) {
        got += w[i][static_cast<std::size_t>(assign[i])];
        EXPECT_TRUE(used.insert(assign[i]).second);
      }
    EXPECT_NEAR(got, testing::oracle::best_assignment(w), 1e-9);
  }
}

TEST(Coref, InvariantUnderMentionRelabeling) {
  nn::Rng rng(35);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(8);
    const EntityPartition pred = random_partition(n, rng);
    const EntityPartition gold = random_partition(n, rng);
    std::vector<Mention> perm(n);
    std::iota(perm.begin(), perm.end(), Mention{0});
    rng.shuffle(perm);
    auto move = [&](EntityPartition p) {
      for (Entity& e : p)
        for (Mention& m : e) m = perm[m] + 100;
      std::reverse(p.begin(), p.end());
      return p;
    };
    const CorefScores a = coref_score(pred, gold);
    const CorefScores b = coref_score(move(pred), move(gold));
    EXPECT_NEAR(a.muc.f1, b.muc.f1, 1e-9);
    EXPECT_NEAR(a.b3.f1, b.b3.f1, 1e-9);
    EXPECT_NEAR(a.ceaf_e.f1, b.ceaf_e.f1, 1e-9);
    EXPECT_NEAR(a.blanc.f1, b.blanc.f1, 1e-9);
  }
}

TEST(Coref, UniverseMismatchAndEmptyEntity) {
  EXPECT_THROW(coref_score({{0, 1}}, {{0}, {2}}), ValidationError);
  EXPECT_THROW(coref_score({{0}, {}}, {{0}}), ValidationError);
  EXPECT_THROW(coref_score({{0, 0}}, {{0}}), ValidationError);
}

TEST(Coref, BlancDegenerateCases) {
  // All singletons on both sides: non-link class only.
  const PRF s = blanc({{0}, {1}, {2}}, {{0}, {1}, {2}});
  EXPECT_TRUE(s.degenerate);
  EXPECT_DOUBLE_EQ(s.f1, 100.0);
  const PRF one = blanc({{0, 1}}, {{0, 1}});
  EXPECT_TRUE(one.degenerate);
  EXPECT_DOUBLE_EQ(one.f1, 100.0);
}

TEST(CorefAccumulator, BlancNeverPairsAcrossDocuments) {
  CorefAccumulator acc;
  acc.add({{0, 1}}, {{0, 1}});
  acc.add({{0, 1}}, {{0, 1}});
  // Two documents, each one gold and one predicted link, no non-links.
  const CorefScores s = acc.score();
  EXPECT_DOUBLE_EQ(s.blanc.f1, 100.0);
  EXPECT_DOUBLE_EQ(s.muc.f1, 100.0);
}

TEST(CorefAccumulator, PoolsMentionCounts) {
  nn::Rng rng(36);
  CorefAccumulator acc;
  EntityPartition pred_all, gold_all;
  Mention offset = 0;
  for (int d = 0; d < 10; ++d) {
    const std::size_t n = 1 + rng.index(6);
    EntityPartition p = random_partition(n, rng), g = random_partition(n, rng);
    acc.add(p, g);
    for (auto* part : {&p, &g})
      for (Entity& e : *part)
        for (Mention& m : e) m += offset;
    pred_all.insert(pred_all.end(), p.begin(), p.end());
    gold_all.insert(gold_all.end(), g.begin(), g.end());
    offset += n;
  }
  const CorefScores s = acc.score();
  const auto b = testing::oracle::b_cubed(pred_all, gold_all);
  EXPECT_NEAR(s.b3.f1, b[2], 1e-9);
  const auto m = testing::oracle::muc(pred_all, gold_all);
  EXPECT_NEAR(s.muc.f1, m[2], 1e-9);
}

}  // namespace
}  // namespace erg::metrics

// tests/metrics_test.cpp

// Copyright 2026  The CDI Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "cdi/error.hpp"
#include "cdi/metrics.hpp"
#include "cdi/random.hpp"
#include "reference.hpp"

namespace cdi {
namespace {

using testing::Labels;
using testing::RefAcc;
using testing::RefAri;
using testing::RefNmi;

Labels RandomLabels(std::size_t n, std::size_t k, SplitMix64 &rng) {
  Labels y(n);
  for (auto &v : y) v = static_cast<std::size_t>(rng.Below(k));
  return y;
}

Labels Relabel(const Labels &y, SplitMix64 &rng) {
  std::vector<std::size_t> perm(20);
  std::iota(perm.begin(), perm.end(), 100);
  Shuffle(std::span<std::size_t>(perm), rng);
  Labels out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = perm[y[i]];
  return out;
}

TEST(MetricOracles, RandomPairsMatchReferences) {
  SplitMix64 rng(2024);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.Below(7);
    const Labels u = RandomLabels(n, 1 + rng.Below(4), rng);
    const Labels v = RandomLabels(n, 1 + rng.Below(4), rng);
    EXPECT_NEAR(Nmi(u, v), RefNmi(u, v), 1e-9) << "case " << t;
    EXPECT_NEAR(Ari(u, v), RefAri(u, v), 1e-9) << "case " << t;
    EXPECT_NEAR(ClusteringAccuracy(u, v), RefAcc(u, v), 1e-9) << "case " << t;
  }
}

TEST(MetricExact, PerfectAgreement) {
  const Labels y = {0, 0, 1, 2, 2, 1, 3};
  EXPECT_EQ(Nmi(y, y), 1.0);
  EXPECT_EQ(Ari(y, y), 1.0);
  EXPECT_EQ(ClusteringAccuracy(y, y), 1.0);
}

TEST(MetricExact, ClosedForms) {
  EXPECT_NEAR(Ari(Labels{0, 0, 1, 1}, Labels{0, 0, 1, 2}), 4.0 / 7.0, 1e-15);
  EXPECT_EQ(Nmi(Labels{0, 0, 1, 1}, Labels{0, 0, 0, 0}), 0.0);
  EXPECT_NEAR(Nmi(Labels{0, 0, 1, 1}, Labels{0, 1, 0, 1}), 0.0, 1e-15);
  EXPECT_EQ(Nmi(Labels{3, 3, 3}, Labels{1, 1, 1}), 1.0);
  EXPECT_EQ(ClusteringAccuracy(Labels{0, 0, 1, 1}, Labels{1, 1, 0, 0}), 1.0);
  for (std::size_t c = 1; c <= 5; ++c) {
    Labels truth;
    for (std::size_t i = 0; i < 4 * c; ++i) truth.push_back(i % c);
    Labels constant(truth.size(), 7);
    EXPECT_NEAR(ClusteringAccuracy(truth, constant), 1.0 / static_cast<double>(c), 1e-15);
  }
}

TEST(MetricExact, Errors) {
  EXPECT_THROW(Ari(Labels{0}, Labels{0}), Error);
  EXPECT_THROW(Nmi(Labels{0, 1}, Labels{0}), Error);
  EXPECT_THROW(Ari(Labels{0, 1}, Labels{0}), Error);
  EXPECT_THROW(ClusteringAccuracy(Labels{0, 1}, Labels{0}), Error);
}

TEST(MetricProperties, RelabelingInvariance) {
  SplitMix64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.Below(30);
    const Labels u = RandomLabels(n, 1 + rng.Below(6), rng);
    const Labels v = RandomLabels(n, 1 + rng.Below(6), rng);
    const Labels u2 = Relabel(u, rng), v2 = Relabel(v, rng);
    EXPECT_NEAR(Nmi(u2, v2), Nmi(u, v), 1e-12);
    EXPECT_NEAR(Ari(u2, v2), Ari(u, v), 1e-12);
    EXPECT_NEAR(ClusteringAccuracy(u2, v2), ClusteringAccuracy(u, v), 1e-12);
  }
}

TEST(MetricProperties, SymmetryAndBounds) {
  SplitMix64 rng(6);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.Below(30);
    const Labels u = RandomLabels(n, 1 + rng.Below(6), rng);
    const Labels v = RandomLabels(n, 1 + rng.Below(6), rng);
    EXPECT_NEAR(Nmi(u, v), Nmi(v, u), 1e-12);
    EXPECT_NEAR(Ari(u, v), Ari(v, u), 1e-12);
    const double nmi = Nmi(u, v), ari = Ari(u, v), acc = ClusteringAccuracy(u, v);
    EXPECT_GE(nmi, -1e-12);
    EXPECT_LE(nmi, 1.0 + 1e-12);
    EXPECT_GE(ari, -1.0);
    EXPECT_LE(ari, 1.0 + 1e-12);
    // The single best contingency cell is always reachable by some map.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> cell;
    std::size_t best = 0;
    for (std::size_t i = 0; i < n; ++i) best = std::max(best, ++cell[{u[i], v[i]}]);
    EXPECT_GE(acc + 1e-12, static_cast<double>(best) / static_cast<double>(n));
  }
}

TEST(MetricProperties, AccuracyAtLeastLargestClassForCoarserPredictions) {
  // With a single predicted cluster the bound is tight.
  SplitMix64 rng(7);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.Below(30);
    const Labels u = RandomLabels(n, 1 + rng.Below(6), rng);
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t x : u) ++counts[x];
    std::size_t largest = 0;
    for (const auto &[_, c] : counts) largest = std::max(largest, c);
    EXPECT_NEAR(ClusteringAccuracy(u, Labels(n, 0)), static_cast<double>(largest) / static_cast<double>(n), 1e-15);
  }
  // The bound does not hold for every prediction: the largest class split
  // evenly between two clusters that each also hold one other class.
  const Labels truth = {0, 0, 1, 0, 0, 2};
  const Labels pred = {0, 0, 0, 1, 1, 1};
  EXPECT_NEAR(ClusteringAccuracy(truth, pred), 3.0 / 6.0, 1e-15);
  EXPECT_NEAR(RefAcc(truth, pred), 3.0 / 6.0, 1e-15);
}

TEST(MetricProperties, RandomPartitionAriCentersOnZero) {
  SplitMix64 rng(8);
  double sum = 0.0;
  for (int t = 0; t < 1000; ++t) sum += Ari(RandomLabels(50, 5, rng), RandomLabels(50, 5, rng));
  EXPECT_NEAR(sum / 1000.0, 0.0, 0.05);
}

TEST(MetricProperties, EncodeLabelsFirstAppearance) {
  std::vector<std::string> raw = {"b", "a", "b", "c", "a"};
  EXPECT_EQ(EncodeLabels(raw), (Labels{0, 1, 0, 2, 1}));
  ClusteringScores s = ScoreClustering(Labels{0, 0, 1, 1}, Labels{0, 0, 1, 2});
  EXPECT_NEAR(s.ari, 4.0 / 7.0, 1e-15);
  EXPECT_EQ(s.acc, 0.75);
}

}  // namespace
}  // namespace cdi

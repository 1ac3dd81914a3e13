// tests/clustering_test.cpp

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
#include <limits>
#include <numeric>
#include <vector>

#include "cdi/clustering.hpp"
#include "cdi/corpus.hpp"
#include "cdi/error.hpp"
#include "cdi/metrics.hpp"
#include "reference.hpp"
#include "test_util.hpp"

namespace cdi {
namespace {

using testing::BruteForceAssignment;
using testing::RandomMatrix;

double InertiaOf(const RowMatrix &points, const std::vector<std::size_t> &assign, std::size_t k) {
  RowMatrix c = RowMatrix::Zero(static_cast<Eigen::Index>(k), points.cols());
  std::vector<double> count(k, 0.0);
  for (std::size_t i = 0; i < assign.size(); ++i) {
    c.row(static_cast<Eigen::Index>(assign[i])) += points.row(static_cast<Eigen::Index>(i));
    count[assign[i]] += 1.0;
  }
  for (std::size_t j = 0; j < k; ++j)
    if (count[j] > 0) c.row(static_cast<Eigen::Index>(j)) /= count[j];
  double total = 0.0;
  for (std::size_t i = 0; i < assign.size(); ++i)
    total += (points.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(assign[i]))).squaredNorm();
  return total;
}

// -- kmeans ------------------------------------------------------------------

TEST(KMeans, SeparatedDuplicates) {
  for (std::size_t m : {1u, 5u}) {
    RowMatrix pts(static_cast<Eigen::Index>(2 * m), 2);
    for (std::size_t i = 0; i < m; ++i) {
      pts.row(static_cast<Eigen::Index>(i)) << 0, 0;
      pts.row(static_cast<Eigen::Index>(m + i)) << 10, 10;
    }
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ClusterModel km = KMeans(pts, 2, seed);
      EXPECT_EQ(km.inertia, 0.0);
      std::vector<std::pair<double, double>> cs;
      for (int j = 0; j < 2; ++j) cs.emplace_back(km.centroids(j, 0), km.centroids(j, 1));
      std::sort(cs.begin(), cs.end());
      EXPECT_EQ(cs[0], std::make_pair(0.0, 0.0));
      EXPECT_EQ(cs[1], std::make_pair(10.0, 10.0));
    }
  }
}

TEST(KMeans, SingleClusterIsMean) {
  SplitMix64 rng(3);
  RowMatrix pts = RandomMatrix(37, 4, rng);
  ClusterModel km = KMeans(pts, 1, 0);
  Eigen::RowVectorXd mean = pts.colwise().mean();
  EXPECT_LT((km.centroids.row(0) - mean).norm(), 1e-12);
  for (std::size_t a : km.assignments) EXPECT_EQ(a, 0u);
}

TEST(KMeans, BeatsRandomAssignment) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SplitMix64 rng(50 + seed);
    RowMatrix pts = RandomMatrix(120, 5, rng);
    const std::size_t k = 6;
    ClusterModel km = KMeans(pts, k, seed);
    std::vector<std::size_t> random(120);
    for (auto &a : random) a = static_cast<std::size_t>(rng.Below(k));
    EXPECT_LE(km.inertia, InertiaOf(pts, random, k));
    EXPECT_NEAR(km.inertia, InertiaOf(pts, km.assignments, k), 1e-8 * (1 + km.inertia));
  }
}

TEST(KMeans, InertiaNonIncreasingAndAssignmentsValid) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SplitMix64 rng(70 + seed);
    RowMatrix pts = RandomMatrix(200, 3, rng);
    KMeansOptions opt;
    opt.n_init = 1;
    ClusterModel km = KMeans(pts, 7, seed, opt);
    ASSERT_FALSE(km.inertia_history.empty());
    for (std::size_t i = 1; i < km.inertia_history.size(); ++i)
      EXPECT_LE(km.inertia_history[i], km.inertia_history[i - 1] * (1 + 1e-12)) << "step " << i;
    for (std::size_t a : km.assignments) EXPECT_LT(a, 7u);
    for (std::size_t s : km.ClusterSizes()) EXPECT_GE(s, 1u);
    EXPECT_TRUE(km.centroids.allFinite());
  }
}

TEST(KMeans, DeterministicForSeed) {
  SplitMix64 rng(9);
  RowMatrix pts = RandomMatrix(150, 4, rng);
  ClusterModel a = KMeans(pts, 5, 42);
  ClusterModel b = KMeans(pts, 5, 42);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, RecoversSeparatedBlobs) {
  BlobSpec spec;
  spec.n = 2000;
  spec.k = 8;
  spec.dim = 32;
  spec.separation = 6.0;
  spec.noise_sigma = 1.0;
  spec.seed = 1;
  Corpus c = MakeSyntheticBlobs(spec);
  ClusterModel km = KMeans(c.Points(), 8, 1);
  std::vector<std::size_t> idx(c.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto gold = EncodeLabels(c.GoldLabels(idx));
  EXPECT_GE(ClusteringAccuracy(gold, km.assignments), 0.99);
}

TEST(KMeans, FewerPointsThanClusters) {
  RowMatrix pts = RowMatrix::Ones(3, 2);
  EXPECT_THROW(KMeans(pts, 4, 0), Error);
}

// -- confidence ----------------------------------------------------------------

TEST(Confidence, SelfOrthogonalAntipodal) {
  ClusterModel m;
  m.k = 1;
  m.centroids.resize(1, 2);
  m.centroids << 1.0, 1.0;
  m.assignments = {0, 0, 0};
  RowMatrix pts(3, 2);
  pts << 1, 1, 1, -1, -2, -2;
  auto s = ConfidenceScores(m, pts);
  EXPECT_NEAR(s[0], 1.0, 1e-15);
  EXPECT_NEAR(s[1], 0.0, 1e-15);
  EXPECT_NEAR(s[2], -1.0, 1e-15);
}

TEST(Confidence, BoundedOnRandomModels) {
  SplitMix64 rng(5);
  RowMatrix pts = RandomMatrix(80, 3, rng);
  ClusterModel km = KMeans(pts, 4, 0);
  for (double s : ConfidenceScores(km, pts)) {
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Confidence, ZeroNormIsDegenerate) {
  ClusterModel m;
  m.k = 1;
  m.centroids = RowMatrix::Ones(1, 2);
  m.assignments = {0};
  RowMatrix pts = RowMatrix::Zero(1, 2);
  try {
    ConfidenceScores(m, pts);
    ADD_FAILURE();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerate);
  }
}

// -- hungarian ---------------------------------------------------------------

TEST(Hungarian, SmallExamples) {
  RowMatrix a(2, 2);
  a << 1, 2, 2, 1;
  Assignment ra = Hungarian(a);
  EXPECT_EQ(ra.row_to_col, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(ra.total_cost, 2.0);
  RowMatrix b(2, 2);
  b << 0, 1, 1, 0;
  EXPECT_EQ(Hungarian(b).total_cost, 0.0);
}

TEST(Hungarian, MatchesBruteForceOnSquare6x6) {
  SplitMix64 rng(11);
  for (int t = 0; t < 100; ++t) {
    RowMatrix cost(6, 6);
    for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = static_cast<double>(rng.Below(50));
    Assignment a = Hungarian(cost);
    EXPECT_EQ(a.total_cost, BruteForceAssignment(cost)) << "case " << t;
  }
}

TEST(Hungarian, MatchesBruteForceUpTo7x7) {
  SplitMix64 rng(12);
  for (int t = 0; t < 100; ++t) {
    const auto cols = static_cast<Eigen::Index>(1 + rng.Below(7));
    const auto rows = static_cast<Eigen::Index>(1 + rng.Below(static_cast<std::uint64_t>(cols)));
    RowMatrix cost(rows, cols);
    for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = static_cast<double>(rng.Below(100)) - 30.0;
    Assignment a = Hungarian(cost);
    ASSERT_EQ(a.row_to_col.size(), static_cast<std::size_t>(rows));
    std::vector<bool> used(static_cast<std::size_t>(cols), false);
    double s = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::size_t c = a.row_to_col[static_cast<std::size_t>(r)];
      ASSERT_LT(c, static_cast<std::size_t>(cols));
      EXPECT_FALSE(used[c]);
      used[c] = true;
      s += cost(r, static_cast<Eigen::Index>(c));
    }
    EXPECT_EQ(s, a.total_cost);
    EXPECT_EQ(a.total_cost, BruteForceAssignment(cost)) << rows << "x" << cols;
  }
}

TEST(Hungarian, RowAndColumnShiftsKeepAssignment) {
  SplitMix64 rng(13);
  for (int t = 0; t < 50; ++t) {
    RowMatrix cost = RandomMatrix(5, 5, rng);
    Assignment base = Hungarian(cost);
    const auto r = static_cast<Eigen::Index>(rng.Below(5));
    const auto c = static_cast<Eigen::Index>(rng.Below(5));
    RowMatrix shifted = cost;
    shifted.row(r).array() += 3.5;
    shifted.col(c).array() -= 1.25;
    Assignment s = Hungarian(shifted);
    EXPECT_EQ(s.row_to_col, base.row_to_col);
    EXPECT_NEAR(s.total_cost, base.total_cost + 3.5 - 1.25, 1e-12);
  }
}

TEST(Hungarian, Errors) {
  RowMatrix tall = RowMatrix::Zero(3, 2);
  EXPECT_THROW(Hungarian(tall), Error);
  RowMatrix nan = RowMatrix::Zero(2, 2);
  nan(0, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    Hungarian(nan);
    ADD_FAILURE();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

// -- alignment ---------------------------------------------------------------

ClusterModel ModelFrom(const RowMatrix &centroids, std::vector<std::size_t> assign) {
  ClusterModel m;
  m.centroids = centroids;
  m.k = static_cast<std::size_t>(centroids.rows());
  m.assignments = std::move(assign);
  return m;
}

TEST(Alignment, RecoversSwap) {
  RowMatrix c(3, 2);
  c << 0, 0, 5, 0, 0, 5;
  ClusterModel prev = ModelFrom(c, {0, 1, 2, 2, 1});
  RowMatrix swapped(3, 2);
  swapped << 5, 0, 0, 0, 0, 5;
  ClusterModel cur = ModelFrom(swapped, {1, 0, 2, 2, 0});
  AlignmentMap map = AlignCentroids(prev, cur);
  EXPECT_EQ(map.permutation[0], 1u);
  EXPECT_EQ(map.permutation[1], 0u);
  EXPECT_EQ(map.permutation[2], 2u);
  EXPECT_TRUE(map.unmatched.empty());
  ClusterModel aligned = ApplyAlignment(cur, map);
  EXPECT_EQ(aligned.assignments, prev.assignments);
  EXPECT_EQ(aligned.centroids, prev.centroids);
}

TEST(Alignment, IdentityOnEqualModels) {
  SplitMix64 rng(4);
  ClusterModel m = ModelFrom(RandomMatrix(4, 3, rng), {0, 1, 2, 3});
  AlignmentMap map = AlignCentroids(m, m);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(map.permutation[i], i);
    EXPECT_EQ(map.relabel[i], i);
  }
}

TEST(Alignment, MoreCurrentClustersMatchNearestPairs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 rng(100 + seed);
    // Five well separated centers; prev holds three of them with small noise.
    RowMatrix cur = RandomMatrix(5, 4, rng, 10.0);
    std::vector<Eigen::Index> order = {0, 1, 2, 3, 4};
    Shuffle(std::span<Eigen::Index>(order), rng);
    RowMatrix prev(3, 4);
    for (int i = 0; i < 3; ++i) prev.row(i) = cur.row(order[static_cast<std::size_t>(i)]) + 0.01 * RandomMatrix(1, 4, rng);
    AlignmentMap map = AlignCentroids(ModelFrom(prev, {}), ModelFrom(cur, {}));
    for (int i = 0; i < 3; ++i) {
      Eigen::Index nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < 5; ++j) {
        const double d = (prev.row(i) - cur.row(j)).squaredNorm();
        if (d < best) best = d, nearest = j;
      }
      EXPECT_EQ(map.permutation[static_cast<std::size_t>(i)], static_cast<std::size_t>(nearest));
    }
    EXPECT_EQ(map.unmatched.size(), 2u);
    std::vector<std::size_t> sorted = map.relabel;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    for (std::size_t u : map.unmatched) EXPECT_GE(map.relabel[u], 3u);
  }
}

TEST(Alignment, RealigningAlignedModelIsIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 rng(200 + seed);
    const auto k_old = static_cast<Eigen::Index>(2 + rng.Below(4));
    const auto k_new = k_old + static_cast<Eigen::Index>(rng.Below(3));
    ClusterModel prev = ModelFrom(RandomMatrix(k_old, 3, rng), {});
    std::vector<std::size_t> assign(30);
    for (auto &a : assign) a = static_cast<std::size_t>(rng.Below(static_cast<std::uint64_t>(k_new)));
    ClusterModel cur = ModelFrom(RandomMatrix(k_new, 3, rng), assign);
    ClusterModel aligned = ApplyAlignment(cur, AlignCentroids(prev, cur));
    AlignmentMap again = AlignCentroids(prev, aligned);
    for (Eigen::Index i = 0; i < k_old; ++i) EXPECT_EQ(again.permutation[static_cast<std::size_t>(i)], static_cast<std::size_t>(i));
    for (Eigen::Index i = 0; i < k_new; ++i) EXPECT_EQ(again.relabel[static_cast<std::size_t>(i)], static_cast<std::size_t>(i));
  }
}

TEST(Alignment, ShrinkingIsRejected) {
  SplitMix64 rng(1);
  ClusterModel prev = ModelFrom(RandomMatrix(4, 2, rng), {});
  ClusterModel cur = ModelFrom(RandomMatrix(3, 2, rng), {0, 1, 2});
  AlignmentMap map = AlignCentroids(prev, cur);
  EXPECT_THROW(ApplyAlignment(cur, map), Error);
}

// -- estimate_k ----------------------------------------------------------------

TEST(EstimateK, CountsClustersAboveMeanSize) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SplitMix64 rng(300 + seed);
    RowMatrix pts = RandomMatrix(90, 3, rng);
    const std::size_t kp = 5 + seed;
    KEstimate est = EstimateK(pts, kp, seed);
    ClusterModel km = KMeans(pts, kp, seed);
    std::size_t expected = 0;
    for (std::size_t s : km.ClusterSizes())
      if (static_cast<double>(s) >= 90.0 / static_cast<double>(kp)) ++expected;
    EXPECT_EQ(est.k, expected);
    EXPECT_LE(est.k, kp);
    EXPECT_GE(est.k, 1u);
    EXPECT_DOUBLE_EQ(est.threshold, 90.0 / static_cast<double>(kp));
  }
}

TEST(EstimateK, DegenerateInputs) {
  RowMatrix same = RowMatrix::Ones(50, 3);
  EXPECT_EQ(EstimateK(same, 10, 0).k, 1u);
  SplitMix64 rng(6);
  RowMatrix pts = RandomMatrix(40, 3, rng);
  EXPECT_EQ(EstimateK(pts, 1, 0).k, 1u);
  KEstimate clamped = EstimateK(pts, 100, 0);
  EXPECT_TRUE(clamped.clamped);
  EXPECT_EQ(clamped.k_prime_used, 40u);
  EXPECT_LE(clamped.k, 40u);
}

}  // namespace
}  // namespace cdi

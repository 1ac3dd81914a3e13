// core/include/cdi/clustering.hpp

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

#ifndef CDI_CLUSTERING_HPP_
#define CDI_CLUSTERING_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cdi/types.hpp"

namespace cdi {

struct ClusterModel {
  RowMatrix centroids;                   // k x dim
  std::vector<std::size_t> assignments;  // per point, < k
  std::vector<double> confidences;       // filled by ConfidenceScores()
  std::size_t k = 0;
  double inertia = 0.0;                  // sum of squared distances

  // Inertia after each assignment step, then the final one.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;

  std::vector<std::size_t> ClusterSizes() const;
};

struct KMeansOptions {
  std::size_t max_iter = 100;
  double tol = 1e-4;
  // Independent seedings; the run with the lowest inertia is kept.
  std::size_t n_init = 10;
};

// k-means++ seeding (greedy, 2 + floor(ln k) candidates per step) followed
// by Lloyd iterations until the largest centroid shift is below tol.
// Empty clusters take the point farthest from its centroid. Ties in the
// assignment step go to the lowest cluster index. With n_init > 1 the
// restart with the lowest final inertia wins (first one on ties).
ClusterModel KMeans(const RowMatrix &points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions &options = {});

// Cosine similarity of each point to its assigned centroid.
// Throws kDegenerate for a zero-norm point or centroid.
std::vector<double> ConfidenceScores(const ClusterModel &model, const RowMatrix &points);

// Rows scaled to unit L2 norm; zero rows are left as zero.
RowMatrix L2NormalizeRows(const RowMatrix &points);

struct Assignment {
  std::vector<std::size_t> row_to_col;
  double total_cost = 0.0;
};

// Minimum-cost injective assignment of rows to columns (rows <= cols),
// shortest augmenting paths with potentials, O(rows^2 * cols).
Assignment Hungarian(const RowMatrix &cost);

struct AlignmentMap {
  // permutation[old] = matched index in the current model, if any.
  std::vector<std::optional<std::size_t>> permutation;
  // Current-model clusters with no previous counterpart, ascending.
  std::vector<std::size_t> unmatched;
  // relabel[cur] = index the current cluster should carry: its matched
  // previous index, or a fresh index >= k_old for unmatched clusters.
  std::vector<std::size_t> relabel;
};

// Matches centroids by Hungarian assignment on squared Euclidean distance.
AlignmentMap AlignCentroids(const ClusterModel &prev, const ClusterModel &cur);

// Returns `cur` with its cluster indices renamed through map.relabel and
// centroid rows permuted to match. Requires k_new >= k_old so the new
// labels are contiguous.
ClusterModel ApplyAlignment(const ClusterModel &cur, const AlignmentMap &map);

struct KEstimate {
  std::size_t k = 1;
  std::size_t k_prime_used = 0;
  bool clamped = false;    // k_prime exceeded N and was lowered to N
  double threshold = 0.0;  // N / k_prime_used
  std::vector<std::size_t> cluster_sizes;
};

// Over-clusters with k_prime, then counts clusters whose size is at least
// the expected mean size N / k_prime. The largest cluster is never below the
// mean, so the estimate is always >= 1.
KEstimate EstimateK(const RowMatrix &points, std::size_t k_prime, std::uint64_t seed,
                    const KMeansOptions &options = {});

}  // namespace cdi

#endif  // CDI_CLUSTERING_HPP_

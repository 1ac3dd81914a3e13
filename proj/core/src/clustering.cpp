// core/src/clustering.cpp

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

#include "cdi/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdi/error.hpp"
#include "cdi/random.hpp"

namespace cdi {

std::vector<std::size_t> ClusterModel::ClusterSizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t a : assignments) ++sizes.at(a);
  return sizes;
}

RowMatrix L2NormalizeRows(const RowMatrix &points) {
  RowMatrix out = points;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

namespace {

// Seeds centroids with greedy k-means++.
RowMatrix SeedCentroids(const RowMatrix &points, std::size_t k, SplitMix64 &rng) {
  const Eigen::Index n = points.rows();
  RowMatrix centroids(static_cast<Eigen::Index>(k), points.cols());
  const auto first = static_cast<Eigen::Index>(rng.Below(static_cast<std::uint64_t>(n)));
  centroids.row(0) = points.row(first);
  Vector closest = (points.rowwise() - points.row(first)).rowwise().squaredNorm();
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));

  for (std::size_t c = 1; c < k; ++c) {
    const double potential = closest.sum();
    Eigen::Index best = -1;
    double best_potential = std::numeric_limits<double>::infinity();
    Vector best_closest;
    for (std::size_t t = 0; t < trials; ++t) {
      Eigen::Index cand = 0;
      if (potential > 0.0) {
        double r = rng.Uniform() * potential;
        cand = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
          r -= closest(i);
          if (r < 0.0 && closest(i) > 0.0) {
            cand = i;
            break;
          }
        }
      } else {
        // Every point coincides with a chosen centroid.
        cand = static_cast<Eigen::Index>(rng.Below(static_cast<std::uint64_t>(n)));
      }
      Vector d = (points.rowwise() - points.row(cand)).rowwise().squaredNorm();
      d = d.cwiseMin(closest);
      const double p = d.sum();
      if (p < best_potential) {
        best_potential = p;
        best = cand;
        best_closest = std::move(d);
      }
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(best);
    closest = std::move(best_closest);
  }
  return centroids;
}

// Nearest-centroid assignment; returns per-point squared distances. The
// argmin is taken on |x|^2 - 2 x.c + |c|^2; the returned distance for the
// chosen centroid is recomputed directly so that coincident points give 0.
Vector Assign(const RowMatrix &points, const RowMatrix &centroids, std::vector<std::size_t> &assign) {
  const Eigen::Index n = points.rows();
  const Vector c_sq = centroids.rowwise().squaredNorm();
  Vector dist(n);
  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - start);
    const auto block = points.middleRows(start, rows);
    RowMatrix d = -2.0 * (block * centroids.transpose());
    d.rowwise() += c_sq.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      Eigen::Index best = 0;
      double best_d = d(r, 0);
      for (Eigen::Index c = 1; c < d.cols(); ++c) {
        if (d(r, c) < best_d) {
          best_d = d(r, c);
          best = c;
        }
      }
      const Eigen::Index i = start + r;
      assign[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
      dist(i) = (points.row(i) - centroids.row(best)).squaredNorm();
    }
  }
  return dist;
}

// Gives every empty cluster the point farthest from its centroid, taken
// from a cluster that keeps at least one member.
void RepairEmpty(const RowMatrix &points, RowMatrix &centroids, std::vector<std::size_t> &assign,
                 Vector &dist) {
  const std::size_t k = static_cast<std::size_t>(centroids.rows());
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t a : assign) ++sizes[a];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] != 0) continue;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (sizes[assign[static_cast<std::size_t>(i)]] > 1 && dist(i) > far_d) {
        far_d = dist(i);
        far = i;
      }
    }
    if (far < 0) break;  // fewer points than clusters; rejected earlier
    --sizes[assign[static_cast<std::size_t>(far)]];
    assign[static_cast<std::size_t>(far)] = c;
    ++sizes[c];
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(far);
    dist(far) = 0.0;
  }
}

}  // namespace

namespace {

ClusterModel LloydRun(const RowMatrix &points, std::size_t k, SplitMix64 &rng,
                      const KMeansOptions &options) {
  const auto n = static_cast<std::size_t>(points.rows());
  ClusterModel model;
  model.k = k;
  model.centroids = SeedCentroids(points, k, rng);
  model.assignments.assign(n, 0);

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    Vector dist = Assign(points, model.centroids, model.assignments);
    RepairEmpty(points, model.centroids, model.assignments, dist);
    model.inertia_history.push_back(dist.sum());
    ++model.iterations;

    RowMatrix next = RowMatrix::Zero(model.centroids.rows(), model.centroids.cols());
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      next.row(static_cast<Eigen::Index>(model.assignments[i])) += points.row(static_cast<Eigen::Index>(i));
      ++sizes[model.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) next.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
    const double shift = (next - model.centroids).rowwise().norm().maxCoeff();
    model.centroids = std::move(next);
    if (shift < options.tol) break;
  }

  Vector dist = Assign(points, model.centroids, model.assignments);
  RepairEmpty(points, model.centroids, model.assignments, dist);
  model.inertia = dist.sum();
  model.inertia_history.push_back(model.inertia);
  return model;
}

}  // namespace

ClusterModel KMeans(const RowMatrix &points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions &options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k-means needs k >= 1");
  if (n < k)
    throw Error(ErrorCode::kInvalidArgument,
                "k-means needs at least k points (N=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  if (!points.allFinite()) throw Error(ErrorCode::kNonFinite, "k-means input contains non-finite values");

  std::optional<ClusterModel> best;
  for (std::size_t run = 0; run < std::max<std::size_t>(1, options.n_init); ++run) {
    SplitMix64 rng(DeriveSeed(seed, {0x6b6d65616e73ULL, run}));
    ClusterModel m = LloydRun(points, k, rng, options);
    if (!best || m.inertia < best->inertia) best = std::move(m);
  }
  return std::move(*best);
}

std::vector<double> ConfidenceScores(const ClusterModel &model, const RowMatrix &points) {
  if (model.assignments.size() != static_cast<std::size_t>(points.rows()))
    throw Error(ErrorCode::kCountMismatch, "assignments do not cover the points");
  if (model.centroids.cols() != points.cols())
    throw Error(ErrorCode::kDimensionMismatch, "points and centroids differ in dimension");
  std::vector<double> out(model.assignments.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto p = points.row(static_cast<Eigen::Index>(i));
    const auto c = model.centroids.row(static_cast<Eigen::Index>(model.assignments.at(i)));
    const double np = p.norm();
    const double nc = c.norm();
    if (!(np > 0.0) || !(nc > 0.0))
      throw Error(ErrorCode::kDegenerate,
                  "degenerate geometry: zero-norm point or centroid at point " + std::to_string(i));
    out[i] = std::clamp(p.dot(c) / (np * nc), -1.0, 1.0);
  }
  return out;
}

Assignment Hungarian(const RowMatrix &cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const auto m = static_cast<std::size_t>(cost.cols());
  if (n > m) throw Error(ErrorCode::kInvalidArgument, "Hungarian needs rows <= cols; pad the matrix");
  if (!cost.allFinite()) throw Error(ErrorCode::kNonFinite, "cost matrix contains non-finite entries");
  Assignment out;
  if (n == 0) return out;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  out.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (match[j] != 0) out.row_to_col[match[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i)
    out.total_cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.row_to_col[i]));
  return out;
}

AlignmentMap AlignCentroids(const ClusterModel &prev, const ClusterModel &cur) {
  if (prev.centroids.cols() != cur.centroids.cols())
    throw Error(ErrorCode::kDimensionMismatch, "cannot align centroids of different dimension");
  const auto k_old = static_cast<std::size_t>(prev.centroids.rows());
  const auto k_new = static_cast<std::size_t>(cur.centroids.rows());
  RowMatrix cost(static_cast<Eigen::Index>(k_old), static_cast<Eigen::Index>(k_new));
  for (std::size_t i = 0; i < k_old; ++i)
    for (std::size_t j = 0; j < k_new; ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (prev.centroids.row(static_cast<Eigen::Index>(i)) - cur.centroids.row(static_cast<Eigen::Index>(j)))
              .squaredNorm();

  AlignmentMap map;
  map.permutation.assign(k_old, std::nullopt);
  std::vector<std::optional<std::size_t>> cur_to_old(k_new);
  if (k_old <= k_new) {
    const Assignment a = Hungarian(cost);
    for (std::size_t i = 0; i < k_old; ++i) {
      map.permutation[i] = a.row_to_col[i];
      cur_to_old[a.row_to_col[i]] = i;
    }
  } else {
    const Assignment a = Hungarian(cost.transpose());
    for (std::size_t j = 0; j < k_new; ++j) {
      map.permutation[a.row_to_col[j]] = j;
      cur_to_old[j] = a.row_to_col[j];
    }
  }
  map.relabel.assign(k_new, 0);
  std::size_t fresh = k_old;
  for (std::size_t j = 0; j < k_new; ++j) {
    if (cur_to_old[j]) {
      map.relabel[j] = *cur_to_old[j];
    } else {
      map.unmatched.push_back(j);
      map.relabel[j] = fresh++;
    }
  }
  return map;
}

ClusterModel ApplyAlignment(const ClusterModel &cur, const AlignmentMap &map) {
  if (map.relabel.size() != cur.k)
    throw Error(ErrorCode::kDimensionMismatch, "alignment map does not match cluster count");
  if (map.permutation.size() > cur.k)
    throw Error(ErrorCode::kInvalidArgument, "relabeling needs k_new >= k_old to stay contiguous");
  ClusterModel out = cur;
  for (std::size_t j = 0; j < cur.k; ++j)
    out.centroids.row(static_cast<Eigen::Index>(map.relabel[j])) = cur.centroids.row(static_cast<Eigen::Index>(j));
  for (auto &a : out.assignments) a = map.relabel.at(a);
  return out;
}

KEstimate EstimateK(const RowMatrix &points, std::size_t k_prime, std::uint64_t seed,
                    const KMeansOptions &options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k_prime < 1) throw Error(ErrorCode::kInvalidArgument, "k_prime must be >= 1");
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "cannot estimate k on an empty set");
  KEstimate est;
  est.k_prime_used = k_prime;
  if (k_prime > n) {
    est.k_prime_used = n;
    est.clamped = true;
  }
  const ClusterModel model = KMeans(points, est.k_prime_used, seed, options);
  est.cluster_sizes = model.ClusterSizes();
  est.threshold = static_cast<double>(n) / static_cast<double>(est.k_prime_used);
  // size >= N / k'  <=>  size * k' >= N, kept in integers.
  est.k = static_cast<std::size_t>(std::count_if(
      est.cluster_sizes.begin(), est.cluster_sizes.end(),
      [&](std::size_t s) { return s * est.k_prime_used >= n; }));
  return est;
}

}  // namespace cdi

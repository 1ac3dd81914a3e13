// core/include/cdi/metrics.hpp

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

#ifndef CDI_METRICS_HPP_
#define CDI_METRICS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cdi {

// Categorical labels encoded as small non-negative integers.
using LabelVector = std::vector<std::size_t>;

// Dense codes in order of first appearance.
LabelVector EncodeLabels(std::span<const std::string> labels);

// I(U;V) / sqrt(H(U) H(V)), natural log. 1 when both partitions are a
// single cluster, 0 when exactly one of them is.
double Nmi(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred);

// Adjusted Rand index (Hubert & Arabie). 1 when numerator and denominator
// both vanish. Requires n >= 2.
double Ari(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred);

// Fraction of points correctly labeled under the best injective
// cluster-to-class map (Hungarian on the confusion counts).
double ClusteringAccuracy(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred);

struct ClusteringScores {
  double acc = 0.0;
  double ari = 0.0;
  double nmi = 0.0;
};

ClusteringScores ScoreClustering(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred);

}  // namespace cdi

#endif  // CDI_METRICS_HPP_

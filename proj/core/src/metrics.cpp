// core/src/metrics.cpp

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

#include "cdi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "cdi/clustering.hpp"
#include "cdi/error.hpp"

namespace cdi {

LabelVector EncodeLabels(std::span<const std::string> labels) {
  std::unordered_map<std::string, std::size_t> codes;
  LabelVector out;
  out.reserve(labels.size());
  for (const auto &l : labels) out.push_back(codes.try_emplace(l, codes.size()).first->second);
  return out;
}

namespace {

struct Contingency {
  std::size_t n = 0;
  std::vector<std::vector<double>> table;  // true x pred
  std::vector<double> row_sums;
  std::vector<double> col_sums;
};

Contingency Tabulate(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred) {
  if (y_true.size() != y_pred.size())
    throw Error(ErrorCode::kCountMismatch, "label vectors differ in length (" + std::to_string(y_true.size()) +
                                               " vs " + std::to_string(y_pred.size()) + ")");
  if (y_true.empty()) throw Error(ErrorCode::kInvalidArgument, "label vectors must be non-empty");
  // Compact the codes so sparse label values do not blow up the table.
  const LabelVector t = [&] {
    std::unordered_map<std::size_t, std::size_t> m;
    LabelVector v;
    for (auto x : y_true) v.push_back(m.try_emplace(x, m.size()).first->second);
    return v;
  }();
  const LabelVector p = [&] {
    std::unordered_map<std::size_t, std::size_t> m;
    LabelVector v;
    for (auto x : y_pred) v.push_back(m.try_emplace(x, m.size()).first->second);
    return v;
  }();
  const std::size_t rows = *std::max_element(t.begin(), t.end()) + 1;
  const std::size_t cols = *std::max_element(p.begin(), p.end()) + 1;
  Contingency c;
  c.n = t.size();
  c.table.assign(rows, std::vector<double>(cols, 0.0));
  c.row_sums.assign(rows, 0.0);
  c.col_sums.assign(cols, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    c.table[t[i]][p[i]] += 1.0;
    c.row_sums[t[i]] += 1.0;
    c.col_sums[p[i]] += 1.0;
  }
  return c;
}

double Entropy(const std::vector<double> &counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  return h;
}

double Choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

double Nmi(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred) {
  const Contingency c = Tabulate(y_true, y_pred);
  const double n = static_cast<double>(c.n);
  const bool single_true = c.row_sums.size() == 1;
  const bool single_pred = c.col_sums.size() == 1;
  if (single_true && single_pred) return 1.0;
  if (single_true || single_pred) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.row_sums.size(); ++i) {
    for (std::size_t j = 0; j < c.col_sums.size(); ++j) {
      const double nij = c.table[i][j];
      if (nij > 0.0) mi += (nij / n) * std::log(n * nij / (c.row_sums[i] * c.col_sums[j]));
    }
  }
  const double h_true = Entropy(c.row_sums, n);
  const double h_pred = Entropy(c.col_sums, n);
  return std::clamp(mi / std::sqrt(h_true * h_pred), 0.0, 1.0);
}

double Ari(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred) {
  if (y_true.size() == y_pred.size() && y_true.size() < 2)
    throw Error(ErrorCode::kInvalidArgument, "ARI needs at least 2 points");
  const Contingency c = Tabulate(y_true, y_pred);
  double index = 0.0;
  for (const auto &row : c.table)
    for (double nij : row) index += Choose2(nij);
  double sum_a = 0.0;
  for (double a : c.row_sums) sum_a += Choose2(a);
  double sum_b = 0.0;
  for (double b : c.col_sums) sum_b += Choose2(b);
  const double expected = sum_a * sum_b / Choose2(static_cast<double>(c.n));
  const double max_index = 0.5 * (sum_a + sum_b);
  const double num = index - expected;
  const double den = max_index - expected;
  if (den == 0.0) return num == 0.0 ? 1.0 : 0.0;
  return num / den;
}

double ClusteringAccuracy(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred) {
  const Contingency c = Tabulate(y_true, y_pred);
  const std::size_t classes = c.row_sums.size();
  const std::size_t clusters = c.col_sums.size();
  // Rows are clusters; pad columns so rows <= cols.
  const std::size_t cols = std::max(classes, clusters);
  RowMatrix cost = RowMatrix::Zero(static_cast<Eigen::Index>(clusters), static_cast<Eigen::Index>(cols));
  for (std::size_t t = 0; t < classes; ++t)
    for (std::size_t p = 0; p < clusters; ++p)
      cost(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(t)) = -c.table[t][p];
  const Assignment a = Hungarian(cost);
  return -a.total_cost / static_cast<double>(c.n);
}

ClusteringScores ScoreClustering(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred) {
  return {ClusteringAccuracy(y_true, y_pred), Ari(y_true, y_pred), Nmi(y_true, y_pred)};
}

}  // namespace cdi

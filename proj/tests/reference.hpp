// tests/reference.hpp

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

#ifndef CDI_TESTS_REFERENCE_HPP_
#define CDI_TESTS_REFERENCE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "cdi/types.hpp"

namespace cdi::testing {

using Labels = std::vector<std::size_t>;

// Reference implementations written independently of the library.

inline double EntropyOf(const std::map<std::size_t, double> &counts, double n) {
  double h = 0.0;
  for (const auto &[_, c] : counts) h -= (c / n) * std::log(c / n);
  return h;
}

inline double RefNmi(const Labels &u, const Labels &v) {
  const double n = static_cast<double>(u.size());
  std::map<std::size_t, double> cu, cv;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cu[u[i]] += 1;
    cv[v[i]] += 1;
    joint[{u[i], v[i]}] += 1;
  }
  const double hu = EntropyOf(cu, n), hv = EntropyOf(cv, n);
  if (cu.size() == 1 && cv.size() == 1) return 1.0;
  if (cu.size() == 1 || cv.size() == 1) return 0.0;
  double mi = 0.0;
  for (const auto &[key, c] : joint) mi += (c / n) * std::log(n * c / (cu[key.first] * cv[key.second]));
  return mi / std::sqrt(hu * hv);
}

// Pair counting: a = together in both, b = together only in u, c = together
// only in v, d = apart in both.
inline double RefAri(const Labels &u, const Labels &v) {
  double a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = i + 1; j < u.size(); ++j) {
      const bool su = u[i] == u[j], sv = v[i] == v[j];
      if (su && sv) ++a;
      else if (su) ++b;
      else if (sv) ++c;
      else ++d;
    }
  const double num = 2.0 * (a * d - b * c);
  const double den = (a + b) * (b + d) + (a + c) * (c + d);
  if (den == 0.0) return 1.0;
  return num / den;
}

// Best injective cluster->class map by enumerating every assignment.
inline double RefAcc(const Labels &truth, const Labels &pred) {
  Labels classes = truth, clusters = pred;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::sort(clusters.begin(), clusters.end());
  clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());
  const std::size_t m = std::max(classes.size(), clusters.size());
  // Slots beyond the real class list stand for "unmapped".
  std::vector<std::size_t> target(m);
  std::iota(target.begin(), target.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const auto ci = static_cast<std::size_t>(std::lower_bound(clusters.begin(), clusters.end(), pred[i]) - clusters.begin());
      const std::size_t t = target[ci];
      if (t < classes.size() && classes[t] == truth[i]) ++hits;
    }
    best = std::max(best, hits);
  } while (std::next_permutation(target.begin(), target.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

// Minimum over all injective row->col maps, by enumerating column orders.
inline double BruteForceAssignment(const RowMatrix &cost) {
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(cost.cols()));
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Eigen::Index r = 0; r < cost.rows(); ++r) s += cost(r, cols[static_cast<std::size_t>(r)]);
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace cdi::testing

#endif  // CDI_TESTS_REFERENCE_HPP_

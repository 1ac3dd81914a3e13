// tests/test_util.hpp

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

#ifndef CDI_TESTS_TEST_UTIL_HPP_
#define CDI_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdi/encoder.hpp"
#include "cdi/random.hpp"
#include "cdi/types.hpp"

namespace cdi::testing {

inline RowMatrix RandomMatrix(Eigen::Index rows, Eigen::Index cols, SplitMix64 &rng, double scale = 1.0) {
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.Normal();
  return m;
}

// Small random encoder with one head per entry of `head_sizes`.
inline EncoderParams RandomParams(std::size_t d, std::size_t d_h, const std::vector<std::size_t> &head_sizes,
                                  double dropout, std::uint64_t seed) {
  SplitMix64 rng(seed);
  EncoderParams p;
  p.w_dense = RandomMatrix(static_cast<Eigen::Index>(d_h), static_cast<Eigen::Index>(d), rng, 0.8);
  p.b_dense = RandomMatrix(static_cast<Eigen::Index>(d_h), 1, rng, 0.3);
  p.dropout_rate = dropout;
  for (std::size_t h = 0; h < head_sizes.size(); ++h) {
    ClassifierHead head;
    for (std::size_t c = 0; c < head_sizes[h]; ++c) head.label_space.push_back("h" + std::to_string(h) + "c" + std::to_string(c));
    head.w = RandomMatrix(static_cast<Eigen::Index>(head_sizes[h]), static_cast<Eigen::Index>(d_h), rng, 0.8);
    p.heads.push_back(std::move(head));
  }
  return p;
}

struct GradCheck {
  double worst = 0.0;   // largest |analytic - fd| / (|analytic| + 1e-8)
  std::size_t checked = 0;
  std::string where;
};

// Central differences (eps = 1e-4) on every coordinate of dense weights,
// bias and all heads, compared with the analytic gradient.
inline GradCheck CheckGradients(const EncoderParams &params, const Gradients &analytic,
                                const std::function<double(const EncoderParams &)> &loss, double eps = 1e-4) {
  GradCheck out;
  EncoderParams p = params;
  auto probe = [&](double *slot, double g, const std::string &name) {
    const double saved = *slot;
    *slot = saved + eps;
    const double up = loss(p);
    *slot = saved - eps;
    const double down = loss(p);
    *slot = saved;
    const double fd = (up - down) / (2.0 * eps);
    const double rel = std::abs(g - fd) / (std::abs(g) + 1e-8);
    ++out.checked;
    if (rel > out.worst) {
      out.worst = rel;
      out.where = name + " analytic=" + std::to_string(g) + " fd=" + std::to_string(fd);
    }
  };
  for (Eigen::Index i = 0; i < p.w_dense.size(); ++i)
    probe(p.w_dense.data() + i, analytic.w_dense.data()[i], "w_dense[" + std::to_string(i) + "]");
  for (Eigen::Index i = 0; i < p.b_dense.size(); ++i)
    probe(p.b_dense.data() + i, analytic.b_dense(i), "b_dense[" + std::to_string(i) + "]");
  for (std::size_t h = 0; h < p.heads.size(); ++h)
    for (Eigen::Index i = 0; i < p.heads[h].w.size(); ++i)
      probe(p.heads[h].w.data() + i, analytic.heads[h].data()[i],
            "head" + std::to_string(h) + "[" + std::to_string(i) + "]");
  return out;
}

}  // namespace cdi::testing

#endif  // CDI_TESTS_TEST_UTIL_HPP_

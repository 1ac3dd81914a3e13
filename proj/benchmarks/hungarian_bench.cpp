// benchmarks/hungarian_bench.cpp

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

#include <benchmark/benchmark.h>

#include "cdi/clustering.hpp"
#include "cdi/random.hpp"

namespace cdi {
namespace {

void BM_Hungarian(benchmark::State &state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  SplitMix64 rng(5);
  RowMatrix cost(n, n);
  for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = rng.Uniform();
  for (auto _ : state) benchmark::DoNotOptimize(Hungarian(cost).total_cost);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(8, 256)->Complexity(benchmark::oNCubed);

}  // namespace
}  // namespace cdi

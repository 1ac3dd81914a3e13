// core/include/cdi/pipeline.hpp

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

#ifndef CDI_PIPELINE_HPP_
#define CDI_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdi/clustering.hpp"
#include "cdi/corpus.hpp"
#include "cdi/encoder.hpp"
#include "cdi/metrics.hpp"

namespace cdi {

struct PipelineConfig {
  TrainConfig train;
  // Per-stage epoch counts; unset means train.epochs. For stage 2 this is
  // the number of epochs per clustering round.
  std::optional<std::size_t> ucl_epochs;
  std::optional<std::size_t> stage1_epochs;
  std::optional<std::size_t> stage2_epochs;
  std::size_t stage2_max_rounds = 10;
  double stage2_change_tol = 0.005;
  // k-means restarts for stage-2 pseudo-labels and discovery proposals.
  std::size_t kmeans_restarts = 10;
  std::optional<std::size_t> fixed_k;
  std::size_t k_prime = 200;
  // Stage 2 normally distills from a stage-1 head; this allows running it
  // on a head-less model with pure pseudo-label cross-entropy.
  bool allow_unsupervised_stage2 = false;
  std::uint64_t eval_seed = 7;

  void Validate() const;
};

struct StageReport {
  std::string stage;
  std::size_t epochs_run = 0;
  std::vector<double> epoch_losses;
  std::optional<double> final_loss;
  double wall_seconds = 0.0;
  std::optional<ClusteringScores> metrics;
  std::uint64_t seed = 0;
  // Classifier head trained in this stage, if any.
  std::optional<std::size_t> head_index;
  // Stage 2 only.
  std::size_t rounds = 0;
  std::vector<double> change_fractions;
  bool stopped_early = false;
};

// Domain adaptation: UclStep over seeded shuffled mini-batches of `points`
// for cfg.epochs. A trailing batch of one sample is folded into the
// previous batch.
StageReport RunUcl(EncoderParams &params, const RowMatrix &points, const TrainConfig &cfg);

// Supervised fine-tuning with LwF. Finds or creates a head over
// `label_space`; distillation targets come from `snapshot_source` (taken as
// given, before any update) through its last head, or through the new
// head's initial weights when the source has none. Throws on empty input.
StageReport RunStage1(EncoderParams &params, const RowMatrix &points,
                      std::span<const std::string> labels,
                      const std::vector<std::string> &label_space,
                      const EncoderParams &snapshot_source, const TrainConfig &cfg);

struct Stage2Result {
  StageReport report;
  ClusterModel clusters;  // last (aligned) clustering
};

// Iterative pseudo-label deep clustering with centroid alignment between
// rounds and LwF against the last head of `snapshot_source`.
Stage2Result RunStage2(EncoderParams &params, const RowMatrix &points, std::size_t k,
                       const EncoderParams &snapshot_source, const PipelineConfig &cfg);

// Inference-mode representations, L2-normalized, clustered with k and
// scored against gold labels.
ClusteringScores Evaluate(const EncoderParams &params, const RowMatrix &points,
                          std::span<const std::string> gold_labels, std::size_t k,
                          std::uint64_t seed);

// argmax over heads[head_index] for every row, inference mode.
std::vector<std::size_t> Classify(const EncoderParams &params, std::size_t head_index,
                                  const RowMatrix &points);

// ---- Known-ratio experiment ------------------------------------------------

struct ExperimentConfig {
  PipelineConfig pipeline;
  std::size_t hidden_dim = 768;
  double dropout_rate = 0.1;
  double known_ratio = 0.5;
  double labeled_fraction = 0.1;
  // Held-out share of the corpus used only for evaluation; 0 evaluates on
  // the training utterances.
  double test_fraction = 0.2;
};

struct ExperimentResult {
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::vector<std::string> known_intents;
  std::size_t labeled_count = 0;
  ClusteringScores stage1;
  ClusteringScores stage2;
  std::vector<StageReport> reports;
  EncoderParams params;
};

// UCL -> stage 1 -> stage 2 with K fixed to the gold intent count (or
// pipeline.fixed_k), evaluated on the held-out split after each supervised
// stage.
ExperimentResult RunKnownRatioExperiment(const Corpus &corpus, const ExperimentConfig &cfg,
                                         std::uint64_t seed);

// Held-out test rows for a given seed; the remainder is for training.
void SplitTestRows(std::size_t n, double test_fraction, std::uint64_t seed,
                   std::vector<std::size_t> &train_rows, std::vector<std::size_t> &test_rows);

}  // namespace cdi

#endif  // CDI_PIPELINE_HPP_

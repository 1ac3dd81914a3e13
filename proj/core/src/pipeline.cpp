// core/src/pipeline.cpp

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

#include "cdi/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cdi/error.hpp"
#include "cdi/random.hpp"

namespace cdi {

void PipelineConfig::Validate() const {
  if (!(train.tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be > 0");
  if (!(train.lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (!(train.learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be > 0");
  if (train.batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  if (!(stage2_change_tol > 0.0 && stage2_change_tol < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "stage2_change_tol must be in (0, 1)");
  if (stage2_max_rounds < 1) throw Error(ErrorCode::kInvalidArgument, "stage2_max_rounds must be >= 1");
  if (fixed_k && *fixed_k < 1) throw Error(ErrorCode::kInvalidArgument, "fixed_k must be >= 1");
  if (k_prime < 1) throw Error(ErrorCode::kInvalidArgument, "k_prime must be >= 1");
  if (kmeans_restarts < 1) throw Error(ErrorCode::kInvalidArgument, "kmeans_restarts must be >= 1");
}

namespace {

using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Seeded permutation cut into batches; a trailing batch smaller than
// `min_batch` is merged into the one before it.
std::vector<std::vector<std::size_t>> MakeBatches(std::size_t n, std::size_t batch_size,
                                                  std::size_t min_batch, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  Shuffle(std::span(order), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() < min_batch) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

RowMatrix Gather(const RowMatrix &points, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), points.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

void CheckLoss(double loss, const std::string &stage, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw Error(ErrorCode::kNonFinite, "non-finite loss in " + stage + " at epoch " + std::to_string(epoch) +
                                           ", batch " + std::to_string(batch));
}

// Mini-batch supervised training shared by stage 1 and stage 2.
void TrainSupervised(EncoderParams &params, std::size_t head, const ModelSnapshot *snapshot,
                     const RowMatrix &points, const std::vector<std::size_t> &targets,
                     const TrainConfig &cfg, std::size_t epochs, std::uint64_t seed,
                     StageReport &report) {
  AdamState opt;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto batches = MakeBatches(static_cast<std::size_t>(points.rows()), cfg.batch_size, 1,
                                     DeriveSeed(seed, {epoch, 0x62617463ULL}));
    double weighted = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const RowMatrix x = Gather(points, batches[b]);
      std::vector<std::size_t> y;
      y.reserve(batches[b].size());
      for (std::size_t r : batches[b]) y.push_back(targets[r]);
      const LossAndGrads lg = SupervisedStep(params, head, snapshot, x, y, cfg, DeriveSeed(seed, {epoch, b}));
      CheckLoss(lg.loss, report.stage, epoch, b);
      ApplyUpdate(params, lg.grads, cfg, opt);
      weighted += lg.loss * static_cast<double>(batches[b].size());
    }
    report.epoch_losses.push_back(weighted / static_cast<double>(points.rows()));
    ++report.epochs_run;
  }
  if (!report.epoch_losses.empty()) report.final_loss = report.epoch_losses.back();
}

std::vector<std::string> PseudoLabelSpace(std::size_t k) {
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t c = 0; c < k; ++c) out.push_back("#cluster-" + std::to_string(c));
  return out;
}

}  // namespace

StageReport RunUcl(EncoderParams &params, const RowMatrix &points, const TrainConfig &cfg) {
  const auto start = Clock::now();
  StageReport report;
  report.stage = "ucl";
  report.seed = cfg.seed;
  if (points.rows() < 1) throw Error(ErrorCode::kInvalidArgument, "UCL needs a non-empty corpus");
  if (cfg.epochs > 0 && points.rows() < 2)
    throw Error(ErrorCode::kInvalidArgument, "UCL needs at least two utterances");
  AdamState opt;
  const auto n = static_cast<std::size_t>(points.rows());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = MakeBatches(n, std::max<std::size_t>(2, cfg.batch_size), 2,
                                     DeriveSeed(cfg.seed, {epoch, 0x62617463ULL}));
    double weighted = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const RowMatrix x = Gather(points, batches[b]);
      const LossAndGrads lg = UclStep(params, x, cfg, DeriveSeed(cfg.seed, {epoch, b, 0x75636cULL}));
      CheckLoss(lg.loss, report.stage, epoch, b);
      ApplyUpdate(params, lg.grads, cfg, opt);
      weighted += lg.loss * static_cast<double>(batches[b].size());
    }
    report.epoch_losses.push_back(weighted / static_cast<double>(n));
    ++report.epochs_run;
  }
  if (!report.epoch_losses.empty()) report.final_loss = report.epoch_losses.back();
  report.wall_seconds = SecondsSince(start);
  return report;
}

StageReport RunStage1(EncoderParams &params, const RowMatrix &points,
                      std::span<const std::string> labels,
                      const std::vector<std::string> &label_space,
                      const EncoderParams &snapshot_source, const TrainConfig &cfg) {
  const auto start = Clock::now();
  if (points.rows() == 0 || labels.empty())
    throw Error(ErrorCode::kInvalidArgument, "stage 1 needs a non-empty labeled set");
  if (static_cast<std::size_t>(points.rows()) != labels.size())
    throw Error(ErrorCode::kCountMismatch, "stage 1 points and labels differ in count");

  StageReport report;
  report.stage = "stage1";
  report.seed = cfg.seed;

  std::size_t head;
  if (auto found = params.FindHead(label_space)) {
    head = *found;
  } else {
    head = params.AddHead(label_space, DeriveSeed(cfg.seed, {0x7331ULL}));
  }
  report.head_index = head;

  std::vector<std::size_t> targets;
  targets.reserve(labels.size());
  for (const auto &l : labels) {
    auto idx = params.heads[head].LabelIndex(l);
    if (!idx) throw Error(ErrorCode::kUnknownLabel, "label '" + l + "' is not among the known intents");
    targets.push_back(*idx);
  }

  std::optional<ModelSnapshot> snapshot;
  if (cfg.lambda > 0.0) {
    EncoderParams source = snapshot_source;
    std::size_t designated;
    if (!source.heads.empty()) {
      designated = source.heads.size() - 1;
    } else {
      // A head-less source distills through the new head's initial weights.
      if (head != 0)
        throw Error(ErrorCode::kMissingHead, "snapshot source has no head to distill from");
      source.heads.push_back(params.heads[head]);
      designated = 0;
    }
    if (designated >= params.heads.size())
      throw Error(ErrorCode::kMissingHead, "snapshot head is not retained in the live params");
    snapshot = ModelSnapshot::Capture(source, designated);
  }

  TrainSupervised(params, head, snapshot ? &*snapshot : nullptr, points, targets, cfg, cfg.epochs,
                  cfg.seed, report);
  report.wall_seconds = SecondsSince(start);
  return report;
}

Stage2Result RunStage2(EncoderParams &params, const RowMatrix &points, std::size_t k,
                       const EncoderParams &snapshot_source, const PipelineConfig &cfg) {
  const auto start = Clock::now();
  cfg.Validate();
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "stage 2 needs k >= 1");
  if (static_cast<std::size_t>(points.rows()) < k)
    throw Error(ErrorCode::kInvalidArgument, "stage 2 needs at least k points");
  if (snapshot_source.heads.empty() && !cfg.allow_unsupervised_stage2)
    throw Error(ErrorCode::kInvalidState,
                "stage 2 requires a stage-1 head to distill from (or allow_unsupervised_stage2)");

  TrainConfig train = cfg.train;
  const std::size_t epochs = cfg.stage2_epochs.value_or(train.epochs);
  Stage2Result out;
  out.report.stage = "stage2";
  out.report.seed = train.seed;

  std::optional<ModelSnapshot> snapshot;
  if (!snapshot_source.heads.empty() && train.lambda > 0.0) {
    const std::size_t designated = snapshot_source.heads.size() - 1;
    if (designated >= params.heads.size())
      throw Error(ErrorCode::kMissingHead, "snapshot head is not retained in the live params");
    snapshot = ModelSnapshot::Capture(snapshot_source, designated);
  }
  const std::size_t head = params.AddHead(PseudoLabelSpace(k), DeriveSeed(train.seed, {0x7332ULL}));
  out.report.head_index = head;

  KMeansOptions kmeans;
  kmeans.n_init = cfg.kmeans_restarts;
  std::optional<ClusterModel> prev;
  for (std::size_t round = 0; round < cfg.stage2_max_rounds; ++round) {
    const RowMatrix reps = L2NormalizeRows(Represent(params, points));
    ClusterModel cm = KMeans(reps, k, DeriveSeed(train.seed, {0x6b6dULL, round}), kmeans);
    if (prev) {
      cm = ApplyAlignment(cm, AlignCentroids(*prev, cm));
      std::size_t changed = 0;
      for (std::size_t i = 0; i < cm.assignments.size(); ++i)
        changed += cm.assignments[i] != prev->assignments[i];
      const double frac = static_cast<double>(changed) / static_cast<double>(cm.assignments.size());
      out.report.change_fractions.push_back(frac);
      if (frac < cfg.stage2_change_tol) {
        out.clusters = std::move(cm);
        out.report.stopped_early = true;
        break;
      }
    }
    TrainSupervised(params, head, snapshot ? &*snapshot : nullptr, points, cm.assignments, train,
                    epochs, DeriveSeed(train.seed, {0x726f756eULL, round}), out.report);
    ++out.report.rounds;
    out.clusters = cm;
    prev = std::move(cm);
  }
  out.report.wall_seconds = SecondsSince(start);
  return out;
}

ClusteringScores Evaluate(const EncoderParams &params, const RowMatrix &points,
                          std::span<const std::string> gold_labels, std::size_t k, std::uint64_t seed) {
  if (static_cast<std::size_t>(points.rows()) != gold_labels.size())
    throw Error(ErrorCode::kMissingGoldLabels, "evaluation needs a gold label for every point");
  const RowMatrix reps = L2NormalizeRows(Represent(params, points));
  const ClusterModel cm = KMeans(reps, std::min<std::size_t>(k, gold_labels.size()), seed);
  const LabelVector truth = EncodeLabels(gold_labels);
  return ScoreClustering(truth, cm.assignments);
}

std::vector<std::size_t> Classify(const EncoderParams &params, std::size_t head_index,
                                  const RowMatrix &points) {
  if (head_index >= params.heads.size())
    throw Error(ErrorCode::kMissingHead, "no classifier head at index " + std::to_string(head_index));
  const RowMatrix logits = Represent(params, points) * params.heads[head_index].w.transpose();
  std::vector<std::size_t> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arg);
  }
  return out;
}

void SplitTestRows(std::size_t n, double test_fraction, std::uint64_t seed,
                   std::vector<std::size_t> &train_rows, std::vector<std::size_t> &test_rows) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "test fraction must be in [0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(DeriveSeed(seed, {0x74657374ULL}));
  Shuffle(std::span(order), rng);
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
  test_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
}

ExperimentResult RunKnownRatioExperiment(const Corpus &corpus, const ExperimentConfig &cfg,
                                         std::uint64_t seed) {
  cfg.pipeline.Validate();
  if (!corpus.HasAllGoldLabels())
    throw Error(ErrorCode::kMissingGoldLabels, "the known-ratio protocol needs gold labels everywhere");

  std::vector<std::size_t> train_rows, test_rows;
  SplitTestRows(corpus.size(), cfg.test_fraction, seed, train_rows, test_rows);
  if (test_rows.empty()) test_rows = train_rows;
  const Corpus train = corpus.Subset(train_rows);
  const RowMatrix train_points = train.Points();
  const RowMatrix test_points = corpus.Points(test_rows);
  const auto test_labels = corpus.GoldLabels(test_rows);

  ExperimentResult result;
  result.seed = seed;
  result.k = cfg.pipeline.fixed_k.value_or(corpus.vocab().size());

  const KnownRatioSplit split = SplitKnownRatio(train, {cfg.known_ratio, cfg.labeled_fraction, seed});
  result.known_intents = split.known_intents;
  result.labeled_count = split.labeled_ids.size();
  const auto labeled_rows = train.IndicesOf(split.labeled_ids);
  const RowMatrix labeled_points = train.Points(labeled_rows);
  const auto labeled_labels = train.GoldLabels(labeled_rows);

  EncoderParams params = EncoderParams::Init(corpus.dim(), cfg.hidden_dim, cfg.dropout_rate,
                                             DeriveSeed(seed, {0x696e6974ULL}));
  const std::uint64_t eval_seed = DeriveSeed(cfg.pipeline.eval_seed, {seed});

  TrainConfig ucl = cfg.pipeline.train;
  ucl.epochs = cfg.pipeline.ucl_epochs.value_or(ucl.epochs);
  ucl.seed = DeriveSeed(seed, {0x75636cULL});
  result.reports.push_back(RunUcl(params, train_points, ucl));

  TrainConfig s1 = cfg.pipeline.train;
  s1.epochs = cfg.pipeline.stage1_epochs.value_or(s1.epochs);
  s1.seed = DeriveSeed(seed, {0x7331ULL});
  const EncoderParams before_stage1 = params;
  StageReport r1 = RunStage1(params, labeled_points, labeled_labels, split.known_intents, before_stage1, s1);
  result.stage1 = Evaluate(params, test_points, test_labels, result.k, eval_seed);
  r1.metrics = result.stage1;
  result.reports.push_back(std::move(r1));

  PipelineConfig p2 = cfg.pipeline;
  p2.train.seed = DeriveSeed(seed, {0x7332ULL});
  const EncoderParams before_stage2 = params;
  Stage2Result r2 = RunStage2(params, train_points, result.k, before_stage2, p2);
  result.stage2 = Evaluate(params, test_points, test_labels, result.k, eval_seed);
  r2.report.metrics = result.stage2;
  result.reports.push_back(std::move(r2.report));
  result.params = std::move(params);
  return result;
}

}  // namespace cdi

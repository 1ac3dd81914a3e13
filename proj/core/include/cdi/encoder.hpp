// core/include/cdi/encoder.hpp

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

#ifndef CDI_ENCODER_HPP_
#define CDI_ENCODER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdi/types.hpp"

namespace cdi {

// Linear classifier without bias: logits = w * h.
struct ClassifierHead {
  RowMatrix w;  // k x d_h
  std::vector<std::string> label_space;

  std::size_t k() const { return label_space.size(); }
  std::optional<std::size_t> LabelIndex(std::string_view label) const;
};

// Trainable projection over frozen base embeddings:
//   h = tanh(w_dense * dropout(x) + b_dense)
// plus any number of classifier heads reading h.
struct EncoderParams {
  RowMatrix w_dense;  // d_h x d
  Vector b_dense;     // d_h
  std::vector<ClassifierHead> heads;
  double dropout_rate = 0.1;

  std::size_t input_dim() const { return static_cast<std::size_t>(w_dense.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w_dense.rows()); }

  // Xavier-uniform dense weights, zero bias, no heads.
  static EncoderParams Init(std::size_t input_dim, std::size_t hidden_dim, double dropout_rate,
                            std::uint64_t seed);

  // Appends a head with N(0, 0.01^2) weights and returns its index.
  std::size_t AddHead(std::vector<std::string> label_space, std::uint64_t seed);
  std::optional<std::size_t> FindHead(std::span<const std::string> label_space) const;

  // Throws kNonFinite / kDimensionMismatch / kInvalidArgument on violations.
  void Validate() const;
};

struct TrainConfig {
  double tau = 0.05;
  double lambda = 0.5;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
};

// Frozen copy of the dense layer and one designated head. head_index() is the
// index the head had in the params it was captured from; heads are only ever
// appended, so it stays valid for the live params.
class ModelSnapshot {
 public:
  static ModelSnapshot Capture(const EncoderParams &params, std::size_t head_index);

  const RowMatrix &w_dense() const { return w_dense_; }
  const Vector &b_dense() const { return b_dense_; }
  const ClassifierHead &head() const { return head_; }
  std::size_t head_index() const { return head_index_; }

 private:
  ModelSnapshot() = default;

  RowMatrix w_dense_;
  Vector b_dense_;
  ClassifierHead head_;
  std::size_t head_index_ = 0;
};

// Same shape as EncoderParams; one matrix per head.
struct Gradients {
  RowMatrix w_dense;
  Vector b_dense;
  std::vector<RowMatrix> heads;

  static Gradients ZerosLike(const EncoderParams &params);
  Gradients &AddScaled(const Gradients &other, double scale);
};

struct LossAndGrads {
  double loss = 0.0;
  Gradients grads;
};

struct ForwardResult {
  Vector h;
  std::vector<Vector> logits;  // one per head
};

// Without a seed the pass is deterministic inference (no dropout). With a
// seed, an inverted-dropout mask derived from it is applied to x.
ForwardResult Forward(const EncoderParams &params, const Eigen::Ref<const Vector> &x,
                      std::optional<std::uint64_t> dropout_seed = std::nullopt);

// Inference-mode representations for every row of `points`.
RowMatrix Represent(const EncoderParams &params, const RowMatrix &points);

// Per-coordinate inverted-dropout scale factors (0 or 1/(1-p)).
Vector DropoutMask(std::size_t dim, double rate, std::uint64_t seed);

// Seed of the dropout mask for sample `index`, view `view` of a step.
std::uint64_t SampleDropoutSeed(std::uint64_t step_seed, std::size_t index, std::size_t view);

// ---- Loss kernels on representations --------------------------------------

struct InfoNceResult {
  double loss = 0.0;
  RowMatrix d_anchors;
  RowMatrix d_positives;
};

// Mean InfoNCE over cosine similarities, denominator over all j (positive
// included). Throws kDegenerate on a zero-norm row.
InfoNceResult InfoNce(const RowMatrix &anchors, const RowMatrix &positives, double tau);

// Mean of -sum_c targets(i,c) * log softmax(logits)(i,c); gradient w.r.t. logits.
struct SoftCrossEntropyResult {
  double loss = 0.0;
  RowMatrix d_logits;
};
SoftCrossEntropyResult SoftCrossEntropy(const RowMatrix &logits, const RowMatrix &targets);

RowMatrix Softmax(const RowMatrix &logits);

// ---- Training losses with analytic gradients ------------------------------

// Unsupervised contrastive step: every row is encoded twice under independent
// dropout masks, the two views form the positive pair.
LossAndGrads UclStep(const EncoderParams &params, const RowMatrix &batch, const TrainConfig &cfg,
                     std::uint64_t step_seed);

// Cross-entropy against `labels` through heads[head_index].
LossAndGrads CeStep(const EncoderParams &params, std::size_t head_index, const RowMatrix &batch,
                    std::span<const std::string> labels, const TrainConfig &cfg,
                    std::uint64_t step_seed);
LossAndGrads CeStep(const EncoderParams &params, std::size_t head_index, const RowMatrix &batch,
                    std::span<const std::size_t> label_indices, const TrainConfig &cfg,
                    std::uint64_t step_seed);

// Distillation from the snapshot's (dropout-free) outputs into the current
// encoder's outputs through the retained head heads[head_index].
LossAndGrads LwfStep(const EncoderParams &params, std::size_t head_index,
                     const ModelSnapshot &snapshot, const RowMatrix &batch, const TrainConfig &cfg,
                     std::uint64_t step_seed);

// CE + cfg.lambda * LwF. The LwF term uses heads[snapshot->head_index()].
// Without a snapshot this is exactly CeStep.
LossAndGrads SupervisedStep(const EncoderParams &params, std::size_t head_index,
                            const ModelSnapshot *snapshot, const RowMatrix &batch,
                            std::span<const std::size_t> label_indices, const TrainConfig &cfg,
                            std::uint64_t step_seed);
LossAndGrads SupervisedStep(const EncoderParams &params, std::size_t head_index,
                            const ModelSnapshot *snapshot, const RowMatrix &batch,
                            std::span<const std::string> labels, const TrainConfig &cfg,
                            std::uint64_t step_seed);

// ---- Optimizer -------------------------------------------------------------

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  std::uint64_t step = 0;
  Gradients m;
  Gradients v;
};

// One Adam update in place. The state grows zero moments for heads added
// since the last call.
void ApplyUpdate(EncoderParams &params, const Gradients &grads, const TrainConfig &cfg,
                 AdamState &state);

// ---- Checkpoint ("CDIM" v1) --------------------------------------------------

inline constexpr char kCdimMagic[4] = {'C', 'D', 'I', 'M'};
inline constexpr std::uint32_t kCdimVersion = 1;

std::string SerializeCheckpoint(const EncoderParams &params);
EncoderParams ParseCheckpoint(std::string_view bytes);
void SaveCheckpoint(const std::filesystem::path &path, const EncoderParams &params);
EncoderParams LoadCheckpoint(const std::filesystem::path &path);

}  // namespace cdi

#endif  // CDI_ENCODER_HPP_

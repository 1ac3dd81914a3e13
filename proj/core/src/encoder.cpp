// core/src/encoder.cpp

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

#include "cdi/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "cdi/error.hpp"
#include "cdi/random.hpp"

namespace cdi {

std::optional<std::size_t> ClassifierHead::LabelIndex(std::string_view label) const {
  for (std::size_t i = 0; i < label_space.size(); ++i)
    if (label_space[i] == label) return i;
  return std::nullopt;
}

EncoderParams EncoderParams::Init(std::size_t input_dim, std::size_t hidden_dim,
                                  double dropout_rate, std::uint64_t seed) {
  if (input_dim < 1) throw Error(ErrorCode::kInvalidArgument, "input dim must be >= 1");
  if (hidden_dim < 2) throw Error(ErrorCode::kInvalidArgument, "hidden dim must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "dropout rate must be in [0, 1)");
  EncoderParams p;
  p.dropout_rate = dropout_rate;
  p.w_dense.resize(hidden_dim, input_dim);
  p.b_dense = Vector::Zero(hidden_dim);
  const double bound = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
  SplitMix64 rng(DeriveSeed(seed, {0x64656e7365ULL}));
  for (Eigen::Index i = 0; i < p.w_dense.size(); ++i)
    p.w_dense.data()[i] = bound * (2.0 * rng.Uniform() - 1.0);
  return p;
}

std::size_t EncoderParams::AddHead(std::vector<std::string> label_space, std::uint64_t seed) {
  if (label_space.empty()) throw Error(ErrorCode::kInvalidArgument, "head needs at least one label");
  std::vector<std::string> sorted = label_space;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorCode::kInvalidArgument, "head label space has duplicate names");
  ClassifierHead head;
  head.w.resize(static_cast<Eigen::Index>(label_space.size()), w_dense.rows());
  SplitMix64 rng(DeriveSeed(seed, {0x68656164ULL, heads.size()}));
  for (Eigen::Index i = 0; i < head.w.size(); ++i) head.w.data()[i] = 0.01 * rng.Normal();
  head.label_space = std::move(label_space);
  heads.push_back(std::move(head));
  return heads.size() - 1;
}

std::optional<std::size_t> EncoderParams::FindHead(std::span<const std::string> label_space) const {
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const auto &ls = heads[i].label_space;
    if (std::equal(ls.begin(), ls.end(), label_space.begin(), label_space.end())) return i;
  }
  return std::nullopt;
}

void EncoderParams::Validate() const {
  if (hidden_dim() < 2) throw Error(ErrorCode::kInvalidArgument, "hidden dim must be >= 2");
  if (b_dense.size() != w_dense.rows())
    throw Error(ErrorCode::kDimensionMismatch, "dense bias length does not match hidden dim");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "dropout rate must be in [0, 1)");
  if (!w_dense.allFinite() || !b_dense.allFinite())
    throw Error(ErrorCode::kNonFinite, "dense parameters contain non-finite values");
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const auto &h = heads[i];
    if (h.w.rows() != static_cast<Eigen::Index>(h.k()) || h.w.cols() != w_dense.rows())
      throw Error(ErrorCode::kDimensionMismatch, "head " + std::to_string(i) + " has wrong shape");
    if (!h.w.allFinite())
      throw Error(ErrorCode::kNonFinite, "head " + std::to_string(i) + " contains non-finite values");
  }
}

ModelSnapshot ModelSnapshot::Capture(const EncoderParams &params, std::size_t head_index) {
  if (head_index >= params.heads.size())
    throw Error(ErrorCode::kMissingHead, "cannot snapshot missing head " + std::to_string(head_index));
  ModelSnapshot s;
  s.w_dense_ = params.w_dense;
  s.b_dense_ = params.b_dense;
  s.head_ = params.heads[head_index];
  s.head_index_ = head_index;
  return s;
}

Gradients Gradients::ZerosLike(const EncoderParams &params) {
  Gradients g;
  g.w_dense = RowMatrix::Zero(params.w_dense.rows(), params.w_dense.cols());
  g.b_dense = Vector::Zero(params.b_dense.size());
  for (const auto &h : params.heads) g.heads.push_back(RowMatrix::Zero(h.w.rows(), h.w.cols()));
  return g;
}

Gradients &Gradients::AddScaled(const Gradients &other, double scale) {
  if (other.heads.size() != heads.size() || other.w_dense.rows() != w_dense.rows() ||
      other.w_dense.cols() != w_dense.cols())
    throw Error(ErrorCode::kDimensionMismatch, "gradient shapes differ");
  w_dense += scale * other.w_dense;
  b_dense += scale * other.b_dense;
  for (std::size_t i = 0; i < heads.size(); ++i) heads[i] += scale * other.heads[i];
  return *this;
}

Vector DropoutMask(std::size_t dim, double rate, std::uint64_t seed) {
  Vector mask = Vector::Ones(static_cast<Eigen::Index>(dim));
  if (rate <= 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  SplitMix64 rng(seed);
  for (std::size_t j = 0; j < dim; ++j) mask(j) = rng.Uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

std::uint64_t SampleDropoutSeed(std::uint64_t step_seed, std::size_t index, std::size_t view) {
  return DeriveSeed(step_seed, {index, view});
}

namespace {

void CheckInput(const EncoderParams &params, Eigen::Index cols) {
  if (static_cast<std::size_t>(cols) != params.input_dim())
    throw Error(ErrorCode::kDimensionMismatch,
                "input has dimension " + std::to_string(cols) + ", encoder expects " +
                    std::to_string(params.input_dim()));
}

void CheckHead(const EncoderParams &params, std::size_t head_index) {
  if (head_index >= params.heads.size())
    throw Error(ErrorCode::kMissingHead, "no classifier head at index " + std::to_string(head_index));
}

// Batched dense + tanh. x_tilde keeps the dropped-out inputs for backward.
struct DenseForward {
  RowMatrix x_tilde;
  RowMatrix h;
};

DenseForward DenseForwardBatch(const RowMatrix &w, const Vector &b, double dropout_rate,
                               const RowMatrix &batch, std::optional<std::uint64_t> step_seed,
                               std::size_t view) {
  DenseForward f;
  f.x_tilde = batch;
  if (step_seed && dropout_rate > 0.0) {
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
      const Vector mask = DropoutMask(static_cast<std::size_t>(batch.cols()), dropout_rate,
                                      SampleDropoutSeed(*step_seed, static_cast<std::size_t>(i), view));
      f.x_tilde.row(i).array() *= mask.transpose().array();
    }
  }
  f.h = f.x_tilde * w.transpose();
  f.h.rowwise() += b.transpose();
  f.h = f.h.array().tanh().matrix();
  return f;
}

// Accumulates dense-layer gradients given dL/dh for a forward pass.
void DenseBackward(const DenseForward &f, const RowMatrix &d_h, Gradients &grads) {
  const RowMatrix d_z = (d_h.array() * (1.0 - f.h.array().square())).matrix();
  grads.w_dense.noalias() += d_z.transpose() * f.x_tilde;
  grads.b_dense += d_z.colwise().sum().transpose();
}

std::vector<std::size_t> MapLabels(const ClassifierHead &head, std::span<const std::string> labels) {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto &l : labels) {
    auto idx = head.LabelIndex(l);
    if (!idx) throw Error(ErrorCode::kUnknownLabel, "label '" + l + "' is not in the head's label space");
    out.push_back(*idx);
  }
  return out;
}

// Snapshot targets: softmax over the frozen head applied to the frozen
// encoder's dropout-free representation.
RowMatrix SnapshotTargets(const ModelSnapshot &snapshot, const RowMatrix &batch) {
  const DenseForward old = DenseForwardBatch(snapshot.w_dense(), snapshot.b_dense(), 0.0, batch,
                                             std::nullopt, 0);
  return Softmax(old.h * snapshot.head().w.transpose());
}

void CheckRetainedHead(const EncoderParams &params, std::size_t head_index,
                       const ModelSnapshot &snapshot) {
  if (head_index >= params.heads.size())
    throw Error(ErrorCode::kMissingHead,
                "no retained head at index " + std::to_string(head_index) + " for distillation");
  const auto &live = params.heads[head_index].label_space;
  const auto &old = snapshot.head().label_space;
  if (live != old)
    throw Error(ErrorCode::kLabelSpaceMismatch,
                "retained head " + std::to_string(head_index) + " has " + std::to_string(live.size()) +
                    " labels, snapshot head has " + std::to_string(old.size()) +
                    " (or the names differ)");
  if (snapshot.w_dense().rows() != params.w_dense.rows() ||
      snapshot.w_dense().cols() != params.w_dense.cols())
    throw Error(ErrorCode::kDimensionMismatch, "snapshot encoder shape differs from params");
}

}  // namespace

ForwardResult Forward(const EncoderParams &params, const Eigen::Ref<const Vector> &x,
                      std::optional<std::uint64_t> dropout_seed) {
  CheckInput(params, x.size());
  Vector x_tilde = x;
  if (dropout_seed && params.dropout_rate > 0.0)
    x_tilde.array() *= DropoutMask(params.input_dim(), params.dropout_rate, *dropout_seed).array();
  ForwardResult out;
  out.h = (params.w_dense * x_tilde + params.b_dense).array().tanh().matrix();
  for (const auto &head : params.heads) out.logits.push_back(head.w * out.h);
  return out;
}

RowMatrix Represent(const EncoderParams &params, const RowMatrix &points) {
  CheckInput(params, points.cols());
  return DenseForwardBatch(params.w_dense, params.b_dense, 0.0, points, std::nullopt, 0).h;
}

RowMatrix Softmax(const RowMatrix &logits) {
  RowMatrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

SoftCrossEntropyResult SoftCrossEntropy(const RowMatrix &logits, const RowMatrix &targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw Error(ErrorCode::kDimensionMismatch, "logits and targets differ in shape");
  const Eigen::Index n = logits.rows();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  SoftCrossEntropyResult r;
  r.d_logits.resize(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    const auto log_q = logits.row(i).array() - lse;
    total -= (targets.row(i).array() * log_q).sum();
    // d/dlogits of -sum_c t_c log q_c = q * sum(t) - t
    r.d_logits.row(i) = (log_q.exp() * targets.row(i).sum() - targets.row(i).array()).matrix();
  }
  r.loss = total / static_cast<double>(n);
  r.d_logits /= static_cast<double>(n);
  return r;
}

InfoNceResult InfoNce(const RowMatrix &anchors, const RowMatrix &positives, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be > 0");
  if (anchors.rows() != positives.rows() || anchors.cols() != positives.cols())
    throw Error(ErrorCode::kDimensionMismatch, "anchor and positive views differ in shape");
  const Eigen::Index n = anchors.rows();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "contrastive batch needs at least 2 samples");

  const Vector na = anchors.rowwise().norm();
  const Vector np = positives.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(na(i) > 0.0) || !(np(i) > 0.0))
      throw Error(ErrorCode::kDegenerate,
                  "degenerate representation: zero-norm vector for sample " + std::to_string(i));
  }
  const RowMatrix a_hat = na.cwiseInverse().asDiagonal() * anchors;
  const RowMatrix p_hat = np.cwiseInverse().asDiagonal() * positives;
  const RowMatrix sim = a_hat * p_hat.transpose();
  const RowMatrix logits = sim / tau;
  const RowMatrix prob = Softmax(logits);

  InfoNceResult r;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, i);
  }
  r.loss = total / static_cast<double>(n);

  // dL/dsim = (P - I) / (n * tau), then through the cosine.
  RowMatrix g = prob;
  g.diagonal().array() -= 1.0;
  g /= static_cast<double>(n) * tau;
  const Vector row_gs = (g.array() * sim.array()).rowwise().sum();
  const Vector col_gs = (g.array() * sim.array()).colwise().sum().transpose();
  r.d_anchors = g * p_hat;
  r.d_anchors -= row_gs.asDiagonal() * a_hat;
  r.d_anchors = na.cwiseInverse().asDiagonal() * r.d_anchors;
  r.d_positives = g.transpose() * a_hat;
  r.d_positives -= col_gs.asDiagonal() * p_hat;
  r.d_positives = np.cwiseInverse().asDiagonal() * r.d_positives;
  return r;
}

LossAndGrads UclStep(const EncoderParams &params, const RowMatrix &batch, const TrainConfig &cfg,
                     std::uint64_t step_seed) {
  CheckInput(params, batch.cols());
  if (batch.rows() < 2)
    throw Error(ErrorCode::kInvalidArgument, "contrastive step needs a batch of at least 2");
  const DenseForward v1 = DenseForwardBatch(params.w_dense, params.b_dense, params.dropout_rate,
                                            batch, step_seed, 0);
  const DenseForward v2 = DenseForwardBatch(params.w_dense, params.b_dense, params.dropout_rate,
                                            batch, step_seed, 1);
  const InfoNceResult nce = InfoNce(v1.h, v2.h, cfg.tau);
  LossAndGrads out{nce.loss, Gradients::ZerosLike(params)};
  DenseBackward(v1, nce.d_anchors, out.grads);
  DenseBackward(v2, nce.d_positives, out.grads);
  return out;
}

LossAndGrads SupervisedStep(const EncoderParams &params, std::size_t head_index,
                            const ModelSnapshot *snapshot, const RowMatrix &batch,
                            std::span<const std::size_t> label_indices, const TrainConfig &cfg,
                            std::uint64_t step_seed) {
  CheckInput(params, batch.cols());
  CheckHead(params, head_index);
  const Eigen::Index n = batch.rows();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  if (static_cast<Eigen::Index>(label_indices.size()) != n)
    throw Error(ErrorCode::kCountMismatch, "label count does not match batch size");
  const ClassifierHead &head = params.heads[head_index];
  RowMatrix onehot = RowMatrix::Zero(n, static_cast<Eigen::Index>(head.k()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t y = label_indices[static_cast<std::size_t>(i)];
    if (y >= head.k()) throw Error(ErrorCode::kUnknownLabel, "label index out of range");
    onehot(i, static_cast<Eigen::Index>(y)) = 1.0;
  }
  if (snapshot) CheckRetainedHead(params, snapshot->head_index(), *snapshot);

  const DenseForward f = DenseForwardBatch(params.w_dense, params.b_dense, params.dropout_rate,
                                           batch, step_seed, 0);
  LossAndGrads out{0.0, Gradients::ZerosLike(params)};

  const SoftCrossEntropyResult ce = SoftCrossEntropy(f.h * head.w.transpose(), onehot);
  out.loss = ce.loss;
  out.grads.heads[head_index].noalias() += ce.d_logits.transpose() * f.h;
  RowMatrix d_h = ce.d_logits * head.w;

  if (snapshot) {
    const std::size_t retained = snapshot->head_index();
    const ClassifierHead &old_head = params.heads[retained];
    const SoftCrossEntropyResult lwf =
        SoftCrossEntropy(f.h * old_head.w.transpose(), SnapshotTargets(*snapshot, batch));
    out.loss = ce.loss + cfg.lambda * lwf.loss;
    out.grads.heads[retained].noalias() += cfg.lambda * (lwf.d_logits.transpose() * f.h);
    d_h.noalias() += cfg.lambda * (lwf.d_logits * old_head.w);
  }
  DenseBackward(f, d_h, out.grads);
  return out;
}

LossAndGrads SupervisedStep(const EncoderParams &params, std::size_t head_index,
                            const ModelSnapshot *snapshot, const RowMatrix &batch,
                            std::span<const std::string> labels, const TrainConfig &cfg,
                            std::uint64_t step_seed) {
  CheckHead(params, head_index);
  const auto idx = MapLabels(params.heads[head_index], labels);
  return SupervisedStep(params, head_index, snapshot, batch, idx, cfg, step_seed);
}

LossAndGrads CeStep(const EncoderParams &params, std::size_t head_index, const RowMatrix &batch,
                    std::span<const std::size_t> label_indices, const TrainConfig &cfg,
                    std::uint64_t step_seed) {
  return SupervisedStep(params, head_index, nullptr, batch, label_indices, cfg, step_seed);
}

LossAndGrads CeStep(const EncoderParams &params, std::size_t head_index, const RowMatrix &batch,
                    std::span<const std::string> labels, const TrainConfig &cfg,
                    std::uint64_t step_seed) {
  return SupervisedStep(params, head_index, nullptr, batch, labels, cfg, step_seed);
}

LossAndGrads LwfStep(const EncoderParams &params, std::size_t head_index,
                     const ModelSnapshot &snapshot, const RowMatrix &batch, const TrainConfig &cfg,
                     std::uint64_t step_seed) {
  CheckInput(params, batch.cols());
  CheckRetainedHead(params, head_index, snapshot);
  if (batch.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  (void)cfg;
  const DenseForward f = DenseForwardBatch(params.w_dense, params.b_dense, params.dropout_rate,
                                           batch, step_seed, 0);
  const ClassifierHead &head = params.heads[head_index];
  const SoftCrossEntropyResult lwf =
      SoftCrossEntropy(f.h * head.w.transpose(), SnapshotTargets(snapshot, batch));
  LossAndGrads out{lwf.loss, Gradients::ZerosLike(params)};
  out.grads.heads[head_index].noalias() += lwf.d_logits.transpose() * f.h;
  DenseBackward(f, lwf.d_logits * head.w, out.grads);
  return out;
}

namespace {

template <typename Mat>
void AdamCoordinates(Mat &param, const Mat &grad, Mat &m, Mat &v, double lr, double bc1, double bc2) {
  m = AdamState::kBeta1 * m + (1.0 - AdamState::kBeta1) * grad;
  v = AdamState::kBeta2 * v + (1.0 - AdamState::kBeta2) * grad.cwiseAbs2();
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + AdamState::kEpsilon);
}

}  // namespace

void ApplyUpdate(EncoderParams &params, const Gradients &grads, const TrainConfig &cfg,
                 AdamState &state) {
  if (grads.w_dense.rows() != params.w_dense.rows() || grads.w_dense.cols() != params.w_dense.cols() ||
      grads.b_dense.size() != params.b_dense.size() || grads.heads.size() != params.heads.size())
    throw Error(ErrorCode::kDimensionMismatch, "gradient shape does not match parameters");
  for (std::size_t i = 0; i < grads.heads.size(); ++i) {
    if (grads.heads[i].rows() != params.heads[i].w.rows() ||
        grads.heads[i].cols() != params.heads[i].w.cols())
      throw Error(ErrorCode::kDimensionMismatch, "head gradient shape does not match parameters");
  }
  if (state.step == 0 && state.m.w_dense.size() == 0) {
    state.m = Gradients::ZerosLike(params);
    state.v = Gradients::ZerosLike(params);
  }
  if (state.m.w_dense.rows() != params.w_dense.rows() || state.m.w_dense.cols() != params.w_dense.cols())
    throw Error(ErrorCode::kDimensionMismatch, "optimizer state shape does not match parameters");
  while (state.m.heads.size() < params.heads.size()) {
    const auto &w = params.heads[state.m.heads.size()].w;
    state.m.heads.push_back(RowMatrix::Zero(w.rows(), w.cols()));
    state.v.heads.push_back(RowMatrix::Zero(w.rows(), w.cols()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double bc2 = 1.0 - std::pow(AdamState::kBeta2, t);
  const double lr = cfg.learning_rate;
  AdamCoordinates(params.w_dense, grads.w_dense, state.m.w_dense, state.v.w_dense, lr, bc1, bc2);
  AdamCoordinates(params.b_dense, grads.b_dense, state.m.b_dense, state.v.b_dense, lr, bc1, bc2);
  for (std::size_t i = 0; i < params.heads.size(); ++i)
    AdamCoordinates(params.heads[i].w, grads.heads[i], state.m.heads[i], state.v.heads[i], lr, bc1, bc2);
}

std::string SerializeCheckpoint(const EncoderParams &params) {
  params.Validate();
  std::string out(kCdimMagic, 4);
  internal::PutU32(out, kCdimVersion);
  internal::PutU32(out, static_cast<std::uint32_t>(params.input_dim()));
  internal::PutU32(out, static_cast<std::uint32_t>(params.hidden_dim()));
  internal::PutF32(out, static_cast<float>(params.dropout_rate));
  for (Eigen::Index i = 0; i < params.w_dense.size(); ++i)
    internal::PutF32(out, static_cast<float>(params.w_dense.data()[i]));
  for (Eigen::Index i = 0; i < params.b_dense.size(); ++i)
    internal::PutF32(out, static_cast<float>(params.b_dense(i)));
  internal::PutU32(out, static_cast<std::uint32_t>(params.heads.size()));
  for (const auto &h : params.heads) {
    internal::PutU32(out, static_cast<std::uint32_t>(h.k()));
    for (const auto &name : h.label_space) {
      internal::PutU32(out, static_cast<std::uint32_t>(name.size()));
      out += name;
    }
    for (Eigen::Index i = 0; i < h.w.size(); ++i) internal::PutF32(out, static_cast<float>(h.w.data()[i]));
  }
  return out;
}

EncoderParams ParseCheckpoint(std::string_view bytes) {
  internal::ByteReader in(bytes);
  if (in.Bytes(4) != std::string_view(kCdimMagic, 4))
    throw Error(ErrorCode::kParse, "bad CDIM magic at offset 0");
  const std::uint32_t version = in.U32();
  if (version != kCdimVersion)
    throw Error(ErrorCode::kParse, "unsupported CDIM version " + std::to_string(version));
  const std::uint32_t d = in.U32();
  const std::uint32_t d_h = in.U32();
  EncoderParams p;
  p.dropout_rate = in.F32();
  p.w_dense.resize(d_h, d);
  for (Eigen::Index i = 0; i < p.w_dense.size(); ++i) p.w_dense.data()[i] = in.F32();
  p.b_dense.resize(d_h);
  for (Eigen::Index i = 0; i < p.b_dense.size(); ++i) p.b_dense(i) = in.F32();
  const std::uint32_t num_heads = in.U32();
  for (std::uint32_t h = 0; h < num_heads; ++h) {
    ClassifierHead head;
    const std::uint32_t k = in.U32();
    for (std::uint32_t c = 0; c < k; ++c) {
      const std::uint32_t len = in.U32();
      head.label_space.emplace_back(in.Bytes(len));
    }
    head.w.resize(k, d_h);
    for (Eigen::Index i = 0; i < head.w.size(); ++i) head.w.data()[i] = in.F32();
    p.heads.push_back(std::move(head));
  }
  if (in.remaining() != 0)
    throw Error(ErrorCode::kParse, "trailing bytes after CDIM payload at offset " + std::to_string(in.offset()));
  p.Validate();
  return p;
}

void SaveCheckpoint(const std::filesystem::path &path, const EncoderParams &params) {
  internal::WriteFileBytes(path, SerializeCheckpoint(params));
}

EncoderParams LoadCheckpoint(const std::filesystem::path &path) {
  return ParseCheckpoint(internal::ReadFileBytes(path));
}

}  // namespace cdi

// core/src/discovery.cpp

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

#include "cdi/discovery.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "cdi/random.hpp"
#include "cdi/serialization.hpp"
#include "digest.hpp"

namespace cdi {

namespace {

constexpr std::uint64_t kTagInit = 0x696e6974ULL;
constexpr std::uint64_t kTagUcl = 0x75636cULL;
constexpr std::uint64_t kTagEstimate = 0x65737469ULL;
constexpr std::uint64_t kTagPropose = 0x70726f70ULL;
constexpr std::uint64_t kTagIteration = 0x69746572ULL;
constexpr std::uint64_t kTagStage1 = 0x7331ULL;
constexpr std::uint64_t kTagStage2 = 0x7332ULL;

std::uint64_t IterationSeed(const SessionState &state) {
  return DeriveSeed(state.config.seed, {kTagIteration, state.iteration});
}

std::uint64_t EvalSeed(const DiscoveryConfig &cfg) { return DeriveSeed(cfg.pipeline.eval_seed, {cfg.seed}); }

std::vector<std::string> Labels(const SessionState &state, std::span<const std::size_t> rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(*state.assigned[r]);
  return out;
}

std::string UtcTimestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void AppendDoubles(std::string &out, const double *data, std::size_t n) {
  out.append(reinterpret_cast<const char *>(data), n * sizeof(double));
}

}  // namespace

std::string_view StatusName(SessionStatus status) {
  switch (status) {
    case SessionStatus::kAwaitingFeedback:
      return "awaiting_feedback";
    case SessionStatus::kTraining:
      return "training";
    case SessionStatus::kConverged:
      return "converged";
  }
  return "unknown";
}

std::string_view ModeName(DiscoveryMode mode) {
  return mode == DiscoveryMode::kOracle ? "oracle" : "interactive";
}

void DiscoveryConfig::Validate() const {
  if (!(gamma_first > 0.0 && gamma_first < 1.0) || !(gamma_rest > 0.0 && gamma_rest < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "confidence thresholds must lie in (0, 1)");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "top_fraction must lie in (0, 1]");
  if (top_window < 1) throw Error(ErrorCode::kInvalidArgument, "top_window must be >= 1");
  if (k_prime < 1) throw Error(ErrorCode::kInvalidArgument, "k_prime must be >= 1");
  if (fixed_k && *fixed_k < 1) throw Error(ErrorCode::kInvalidArgument, "fixed_k must be >= 1");
  if (patience < 1) throw Error(ErrorCode::kInvalidArgument, "patience must be >= 1");
  if (max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  if (hidden_dim < 1) throw Error(ErrorCode::kInvalidArgument, "hidden_dim must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "dropout_rate must lie in [0, 1)");
  pipeline.Validate();
}

bool Feedback::empty() const {
  if (!merges.empty()) return false;
  return std::all_of(clusters.begin(), clusters.end(),
                     [](const ClusterFeedback &c) { return c.accepted.empty() && c.rejected.empty(); });
}

FeedbackError::FeedbackError(std::vector<FeedbackViolation> violations)
    : Error(ErrorCode::kInvalidFeedback,
            violations.empty() ? std::string("invalid feedback")
                               : "invalid feedback: " + violations.front().message +
                                     (violations.size() > 1
                                          ? " (+" + std::to_string(violations.size() - 1) + " more)"
                                          : std::string())),
      violations_(std::move(violations)) {}

std::size_t SessionState::labeled_count() const {
  return static_cast<std::size_t>(std::count_if(assigned.begin(), assigned.end(),
                                                [](const auto &a) { return a.has_value(); }));
}

std::vector<std::size_t> SessionState::LabeledRows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assigned.size(); ++i)
    if (assigned[i]) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> SessionState::UnlabeledRows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assigned.size(); ++i)
    if (!assigned[i]) rows.push_back(i);
  return rows;
}

RowMatrix ProjectTo2d(const RowMatrix &points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  RowMatrix out = RowMatrix::Zero(n, 2);
  if (n < 2 || d < 1) return out;
  const RowMatrix centered = points.rowwise() - points.colwise().mean();
  const Eigen::Index m = std::min<Eigen::Index>(2, d);

  // Subspace iteration on the scatter matrix from a fixed start.
  Eigen::MatrixXd basis(d, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < d; ++i) basis(i, j) = 1.0 / (1.0 + static_cast<double>((i * (j + 2)) % 7));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr;
  for (int it = 0; it < 300; ++it) {
    Eigen::MatrixXd next = centered.transpose() * (centered * basis);
    if (next.norm() == 0.0) return out;
    qr.compute(next);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, m);
    const double delta = (q * (q.transpose() * basis) - basis).norm();
    basis = std::move(q);
    if (delta < 1e-10) break;
  }
  // Order the two directions by explained variance.
  const Eigen::MatrixXd projected = centered * basis;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(projected.transpose() * projected);
  Eigen::MatrixXd rot = eig.eigenvectors().rowwise().reverse();
  Eigen::MatrixXd axes = basis * rot;
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index arg;
    axes.col(j).cwiseAbs().maxCoeff(&arg);
    if (axes(arg, j) < 0.0) axes.col(j) *= -1.0;
  }
  out.leftCols(m) = centered * axes;
  return out;
}

SessionState InitSession(std::shared_ptr<const Corpus> corpus, const DiscoveryConfig &config) {
  if (!corpus || corpus->size() == 0) throw Error(ErrorCode::kInvalidArgument, "discovery needs a non-empty corpus");
  config.Validate();
  SessionState state;
  state.corpus = corpus;
  state.config = config;
  state.assigned.assign(corpus->size(), std::nullopt);
  state.params = EncoderParams::Init(corpus->dim(), config.hidden_dim, config.dropout_rate,
                                     DeriveSeed(config.seed, {kTagInit}));

  const RowMatrix points = corpus->Points();
  TrainConfig ucl = config.pipeline.train;
  ucl.epochs = config.pipeline.ucl_epochs.value_or(ucl.epochs);
  ucl.seed = DeriveSeed(config.seed, {kTagUcl});
  if (points.rows() < 2) ucl.epochs = 0;
  state.ucl_report = RunUcl(state.params, points, ucl);

  const auto fixed = config.fixed_k ? config.fixed_k : config.pipeline.fixed_k;
  if (fixed) {
    if (*fixed > corpus->size())
      throw Error(ErrorCode::kInvalidArgument, "fixed k exceeds the corpus size");
    state.k_t = *fixed;
  } else {
    KMeansOptions opts;
    opts.n_init = config.pipeline.kmeans_restarts;
    const RowMatrix reps = L2NormalizeRows(Represent(state.params, points));
    state.k_estimate = EstimateK(reps, config.k_prime, DeriveSeed(config.seed, {kTagEstimate}), opts);
    state.k_t = state.k_estimate->k;
  }
  state.k_history.push_back(state.k_t);
  state.status = SessionStatus::kAwaitingFeedback;
  return state;
}

const std::vector<ClusterProposal> &ProposeClusters(SessionState &state) {
  if (state.status == SessionStatus::kTraining)
    throw Error(ErrorCode::kInvalidState, "cannot propose clusters while training");
  if (state.proposals) return *state.proposals;
  state.proposals.emplace();
  if (state.status == SessionStatus::kConverged) return *state.proposals;

  const std::vector<std::size_t> rows = state.UnlabeledRows();
  if (rows.empty()) {
    state.status = SessionStatus::kConverged;
    state.termination_reason = "unlabeled set exhausted";
    return *state.proposals;
  }
  const Corpus &corpus = *state.corpus;
  const RowMatrix reps = L2NormalizeRows(Represent(state.params, corpus.Points(rows)));
  const std::size_t k = std::min(state.k_t, rows.size());
  KMeansOptions opts;
  opts.n_init = state.config.pipeline.kmeans_restarts;
  const ClusterModel model =
      KMeans(reps, k, DeriveSeed(state.config.seed, {kTagPropose, state.iteration}), opts);
  const std::vector<double> conf = ConfidenceScores(model, reps);
  const RowMatrix xy = ProjectTo2d(reps);
  const double gamma = state.iteration == 1 ? state.config.gamma_first : state.config.gamma_rest;

  std::vector<ClusterProposal> out(k);
  for (std::size_t c = 0; c < k; ++c) out[c].cluster_id = c;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ClusterProposal &p = out[model.assignments[i]];
    const Utterance &u = corpus.utterance(rows[i]);
    const auto r = static_cast<Eigen::Index>(i);
    ++p.size;
    p.members.push_back({u.id, xy(r, 0), xy(r, 1)});
    if (conf[i] > gamma) p.samples.push_back({u.id, u.text, conf[i], xy(r, 0), xy(r, 1)});
  }
  for (auto &p : out)
    std::stable_sort(p.samples.begin(), p.samples.end(),
                     [](const RankedSample &a, const RankedSample &b) { return a.confidence > b.confidence; });
  std::stable_sort(out.begin(), out.end(),
                   [](const ClusterProposal &a, const ClusterProposal &b) { return a.size > b.size; });
  *state.proposals = std::move(out);
  return *state.proposals;
}

Feedback SimulatedOracle(const SessionState &state, std::span<const ClusterProposal> proposals) {
  const Corpus &corpus = *state.corpus;
  auto gold = [&](const std::string &id) -> const std::string & {
    const auto row = corpus.IndexOf(id);
    if (!row) throw Error(ErrorCode::kNotFound, "unknown utterance id '" + id + "'");
    const auto &label = corpus.utterance(*row).gold_label;
    if (!label) throw Error(ErrorCode::kMissingGoldLabels, "utterance '" + id + "' has no gold label");
    return *label;
  };

  Feedback fb;
  for (const ClusterProposal &p : proposals) {
    const std::size_t len = p.samples.size();
    if (len == 0) continue;
    ClusterFeedback cf;
    cf.cluster_id = p.cluster_id;
    const auto top = static_cast<std::size_t>(
        std::ceil(state.config.top_fraction * static_cast<double>(len) - 1e-9));
    const std::string &first = gold(p.samples[0].id);
    bool uniform = true;
    for (std::size_t i = 1; i < top && uniform; ++i) uniform = gold(p.samples[i].id) == first;
    if (uniform) {
      cf.intent = first;
      for (std::size_t i = 0; i < top; ++i) cf.accepted.push_back(p.samples[i].id);
    } else {
      const std::size_t window = std::min(state.config.top_window, len);
      // Modal label of the window; the earliest label wins a tie.
      std::vector<std::pair<std::string, std::size_t>> counts;
      for (std::size_t i = 0; i < window; ++i) {
        const std::string &l = gold(p.samples[i].id);
        auto it = std::find_if(counts.begin(), counts.end(), [&](const auto &e) { return e.first == l; });
        if (it == counts.end())
          counts.emplace_back(l, 1);
        else
          ++it->second;
      }
      auto best = counts.begin();
      for (auto it = counts.begin(); it != counts.end(); ++it)
        if (it->second > best->second) best = it;
      cf.intent = best->first;
      for (std::size_t i = 0; i < window; ++i)
        if (gold(p.samples[i].id) == cf.intent) cf.accepted.push_back(p.samples[i].id);
    }
    fb.clusters.push_back(std::move(cf));
  }
  return fb;
}

namespace {

// Intent per feedback entry once merge groups are resolved: a group takes
// the first non-empty intent among its entries, in feedback order.
std::vector<std::string> ResolveIntents(const Feedback &fb) {
  std::vector<std::string> intents;
  intents.reserve(fb.clusters.size());
  for (const auto &c : fb.clusters) intents.push_back(c.intent);
  for (const auto &group : fb.merges) {
    const std::set<std::size_t> ids(group.begin(), group.end());
    std::string name;
    for (const auto &c : fb.clusters)
      if (ids.count(c.cluster_id) && !c.intent.empty()) {
        name = c.intent;
        break;
      }
    if (name.empty()) continue;
    for (std::size_t i = 0; i < fb.clusters.size(); ++i)
      if (ids.count(fb.clusters[i].cluster_id)) intents[i] = name;
  }
  return intents;
}

bool KnownCluster(const SessionState &state, std::size_t cluster_id) {
  if (state.proposals)
    return std::any_of(state.proposals->begin(), state.proposals->end(),
                       [&](const ClusterProposal &p) { return p.cluster_id == cluster_id; });
  return cluster_id < state.k_t;
}

}  // namespace

std::vector<FeedbackViolation> ValidateFeedback(const SessionState &state, const Feedback &fb) {
  std::vector<FeedbackViolation> out;
  const Corpus &corpus = *state.corpus;
  const std::vector<std::string> intents = ResolveIntents(fb);
  std::unordered_map<std::string, std::size_t> accepted_in;  // id -> cluster
  std::unordered_set<std::string> rejected_all;
  for (const auto &c : fb.clusters) rejected_all.insert(c.rejected.begin(), c.rejected.end());

  std::set<std::size_t> seen_clusters;
  for (std::size_t e = 0; e < fb.clusters.size(); ++e) {
    const ClusterFeedback &c = fb.clusters[e];
    if (!KnownCluster(state, c.cluster_id))
      out.push_back({"unknown_cluster", "cluster " + std::to_string(c.cluster_id) + " is not proposed", std::nullopt,
                     c.cluster_id});
    if (!seen_clusters.insert(c.cluster_id).second)
      out.push_back({"duplicate_cluster", "cluster " + std::to_string(c.cluster_id) + " appears more than once",
                     std::nullopt, c.cluster_id});
    if (!c.accepted.empty() && intents[e].empty())
      out.push_back({"empty_intent", "accepted samples need an intent name", std::nullopt, c.cluster_id});
    for (const auto &id : c.accepted) {
      const auto row = corpus.IndexOf(id);
      if (!row) {
        out.push_back({"unknown_id", "utterance '" + id + "' does not exist", id, c.cluster_id});
        continue;
      }
      if (state.assigned[*row])
        out.push_back({"already_labeled", "utterance '" + id + "' is already labeled", id, c.cluster_id});
      if (rejected_all.count(id))
        out.push_back({"accepted_and_rejected", "utterance '" + id + "' is both accepted and rejected", id,
                       c.cluster_id});
      auto [it, fresh] = accepted_in.emplace(id, c.cluster_id);
      if (!fresh)
        out.push_back({"duplicate_accept", "utterance '" + id + "' is accepted more than once", id, c.cluster_id});
    }
    for (const auto &id : c.rejected)
      if (!corpus.IndexOf(id))
        out.push_back({"unknown_id", "utterance '" + id + "' does not exist", id, c.cluster_id});
  }

  std::set<std::size_t> merged;
  for (const auto &group : fb.merges) {
    if (group.size() < 2) {
      out.push_back({"invalid_merge", "a merge needs at least two clusters", std::nullopt, std::nullopt});
      continue;
    }
    const std::set<std::size_t> ids(group.begin(), group.end());
    for (std::size_t cid : ids) {
      if (!KnownCluster(state, cid))
        out.push_back({"unknown_cluster", "merged cluster " + std::to_string(cid) + " is not proposed",
                       std::nullopt, cid});
      if (!merged.insert(cid).second)
        out.push_back({"overlapping_merge", "cluster " + std::to_string(cid) + " is in more than one merge",
                       std::nullopt, cid});
    }
  }
  return out;
}

void ApplyFeedback(SessionState &state, const Feedback &feedback) {
  if (state.status != SessionStatus::kAwaitingFeedback)
    throw Error(ErrorCode::kInvalidState,
                "session is " + std::string(StatusName(state.status)) + ", not awaiting feedback");
  auto violations = ValidateFeedback(state, feedback);
  if (!violations.empty()) throw FeedbackError(std::move(violations));

  const std::vector<std::string> intents = ResolveIntents(feedback);
  std::unordered_set<std::string> moved;
  for (std::size_t e = 0; e < feedback.clusters.size(); ++e) {
    for (const auto &id : feedback.clusters[e].accepted) {
      state.assigned[*state.corpus->IndexOf(id)] = intents[e];
      moved.insert(id);
    }
    if (!feedback.clusters[e].accepted.empty() &&
        std::find(state.intents.begin(), state.intents.end(), intents[e]) == state.intents.end())
      state.intents.push_back(intents[e]);
  }
  state.feedback_this_iteration = true;
  // Cluster ids stay stable for the rest of the iteration; only the newly
  // labeled samples drop out of the ranked lists.
  if (state.proposals && !moved.empty())
    for (auto &p : *state.proposals)
      std::erase_if(p.samples, [&](const RankedSample &s) { return moved.count(s.id) > 0; });
}

AdvanceOutcome AdvanceIteration(SessionState &state) {
  if (state.status != SessionStatus::kAwaitingFeedback)
    throw Error(ErrorCode::kInvalidState,
                "session is " + std::string(StatusName(state.status)) + ", cannot advance");
  if (!state.feedback_this_iteration) return {false, "no feedback has been applied this iteration"};
  const std::vector<std::size_t> labeled = state.LabeledRows();
  if (labeled.empty()) return {false, "no labeled utterances yet"};

  const Corpus &corpus = *state.corpus;
  const DiscoveryConfig &cfg = state.config;
  const std::uint64_t it_seed = IterationSeed(state);
  const bool gold = corpus.HasAllGoldLabels();
  const std::size_t eval_k = corpus.vocab().size();
  const RowMatrix all_points = corpus.Points();
  std::vector<std::string> gold_labels;
  if (gold)
    for (const auto &u : corpus.utterances()) gold_labels.push_back(*u.gold_label);

  state.status = SessionStatus::kTraining;
  EncoderParams params = state.params;
  IterationRecord record;
  try {
    TrainConfig s1 = cfg.pipeline.train;
    s1.epochs = cfg.pipeline.stage1_epochs.value_or(s1.epochs);
    s1.seed = DeriveSeed(it_seed, {kTagStage1});
    const EncoderParams before_stage1 = params;
    StageReport r1 = RunStage1(params, corpus.Points(labeled), Labels(state, labeled), state.intents,
                               before_stage1, s1);
    if (gold) {
      record.stage1 = Evaluate(params, all_points, gold_labels, eval_k, EvalSeed(cfg));
      r1.metrics = record.stage1;
    }

    PipelineConfig p2 = cfg.pipeline;
    p2.train.seed = DeriveSeed(it_seed, {kTagStage2});
    const EncoderParams before_stage2 = params;
    Stage2Result r2 = RunStage2(params, all_points, std::min(state.k_t, corpus.size()), before_stage2, p2);
    if (gold) {
      record.stage2 = Evaluate(params, all_points, gold_labels, eval_k, EvalSeed(cfg));
      r2.report.metrics = record.stage2;
    }
    record.reports.push_back(std::move(r1));
    record.reports.push_back(std::move(r2.report));
  } catch (...) {
    state.status = SessionStatus::kAwaitingFeedback;
    throw;
  }

  state.params = std::move(params);
  record.iteration = state.iteration;
  record.k = state.k_t;
  record.num_intents = state.intents.size();
  record.labeled_count = labeled.size();
  record.labeled_fraction = static_cast<double>(labeled.size()) / static_cast<double>(corpus.size());
  state.k_t = std::max(state.k_t, state.intents.size());
  record.k_next = state.k_t;
  state.k_history.push_back(state.k_t);
  state.history.push_back(std::move(record));
  ++state.iteration;
  state.feedback_this_iteration = false;
  state.proposals.reset();

  const TerminationDecision t = ShouldTerminate(state);
  if (t.terminate) {
    state.status = SessionStatus::kConverged;
    state.termination_reason = t.reason;
  } else {
    state.status = SessionStatus::kAwaitingFeedback;
  }
  return {true, {}};
}

TerminationDecision ShouldTerminate(const SessionState &state) {
  if (state.finalized) return {true, "finalized by user"};
  if (state.unlabeled_count() == 0) return {true, "unlabeled set exhausted"};
  const Corpus &corpus = *state.corpus;
  if (state.config.mode == DiscoveryMode::kOracle) {
    if (corpus.HasAllGoldLabels() && state.intents.size() == corpus.vocab().size())
      return {true, "all intents discovered"};
  } else {
    const auto &ks = state.k_history;
    const std::size_t p = state.config.patience;
    if (ks.size() >= p + 1 && std::all_of(ks.end() - static_cast<std::ptrdiff_t>(p + 1), ks.end(),
                                          [&](std::size_t k) { return k == ks.back(); }))
      return {true, "k_t unchanged for " + std::to_string(p) + " iterations"};
  }
  if (state.history.size() >= state.config.max_iterations) return {true, "iteration limit reached"};
  return {false, {}};
}

void Finalize(SessionState &state) {
  if (state.status == SessionStatus::kTraining)
    throw Error(ErrorCode::kInvalidState, "cannot finalize while training");
  state.finalized = true;
  state.status = SessionStatus::kConverged;
  state.termination_reason = "finalized by user";
  state.proposals.reset();
}

std::string StateDigest(const SessionState &state) {
  Json j;
  Json labeled = Json::array();
  for (std::size_t i = 0; i < state.assigned.size(); ++i)
    if (state.assigned[i]) labeled.push_back({state.corpus->utterance(i).id, *state.assigned[i]});
  j["labeled"] = std::move(labeled);
  j["intents"] = state.intents;
  j["k_t"] = state.k_t;
  j["iteration"] = state.iteration;
  j["k_history"] = state.k_history;
  j["status"] = StatusName(state.status);
  j["feedback_this_iteration"] = state.feedback_this_iteration;
  j["finalized"] = state.finalized;
  j["termination_reason"] = state.termination_reason;
  j["config"] = ToJson(state.config);
  Json history = Json::array();
  for (IterationRecord r : state.history) {
    for (auto &s : r.reports) s.wall_seconds = 0.0;  // timing is not state
    history.push_back(ToJson(r));
  }
  j["history"] = std::move(history);
  if (state.k_estimate) j["k_estimate"] = ToJson(*state.k_estimate);

  const EncoderParams &p = state.params;
  std::string bytes;
  AppendDoubles(bytes, p.w_dense.data(), static_cast<std::size_t>(p.w_dense.size()));
  AppendDoubles(bytes, p.b_dense.data(), static_cast<std::size_t>(p.b_dense.size()));
  AppendDoubles(bytes, &p.dropout_rate, 1);
  for (const auto &h : p.heads) {
    AppendDoubles(bytes, h.w.data(), static_cast<std::size_t>(h.w.size()));
    for (const auto &l : h.label_space) {
      bytes += l;
      bytes.push_back('\0');
    }
  }
  return internal::Sha256Hex({j.dump(), bytes});
}

// ---- Event log ----------------------------------------------------------------

std::string EncodeEvent(const SessionEvent &e) {
  Json payload = e.payload.empty() ? Json::object() : Json::parse(e.payload);
  Json j = {{"type", e.type}, {"timestamp", e.timestamp}, {"seed", e.seed}, {"payload", std::move(payload)}};
  if (!e.request_id.empty()) j["request_id"] = e.request_id;
  return j.dump();
}

SessionEvent DecodeEvent(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kParse, std::string("malformed event: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type")) throw Error(ErrorCode::kParse, "event needs a type");
  SessionEvent e;
  e.type = j.at("type").get<std::string>();
  e.timestamp = j.value("timestamp", "");
  e.seed = j.value("seed", std::uint64_t{0});
  e.request_id = j.value("request_id", "");
  e.payload = j.contains("payload") ? j.at("payload").dump() : "{}";
  return e;
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void EventLog::Append(const SessionEvent &event) {
  const std::string line = EncodeEvent(event) + "\n";
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot open " + path_.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t w = ::write(fd, line.data() + done, line.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error(ErrorCode::kIo, "cannot write " + path_.string() + ": " + std::strerror(err));
    }
    done += static_cast<std::size_t>(w);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw Error(ErrorCode::kIo, "cannot sync " + path_.string());
}

std::vector<SessionEvent> EventLog::Read(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<SessionEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // A torn final line (crash mid-append) is dropped.
    if (in.eof() && !Json::accept(line)) break;
    out.push_back(DecodeEvent(line));
  }
  return out;
}

namespace {

Json WallSeconds(const IterationRecord &r) {
  Json out = Json::array();
  for (const auto &s : r.reports) out.push_back(s.wall_seconds);
  return out;
}

}  // namespace

DiscoverySession DiscoverySession::Create(std::shared_ptr<const Corpus> corpus, const DiscoveryConfig &config,
                                          std::optional<std::filesystem::path> log_path) {
  DiscoverySession s;
  if (log_path) s.log_.emplace(*log_path);
  s.state_ = InitSession(corpus, config);
  Json payload = {{"config", ToJson(config)},
                  {"corpus_fingerprint", corpus->Fingerprint()},
                  {"ucl_wall_seconds", s.state_.ucl_report.wall_seconds},
                  {"digest", StateDigest(s.state_)}};
  s.Record({"init", {}, payload.dump(), config.seed, {}});
  return s;
}

DiscoverySession DiscoverySession::Replay(std::shared_ptr<const Corpus> corpus,
                                          std::span<const SessionEvent> events,
                                          std::optional<std::filesystem::path> log_path) {
  if (events.empty() || events.front().type != "init")
    throw Error(ErrorCode::kParse, "an event log must start with an init event");
  DiscoverySession s;
  for (const SessionEvent &e : events) {
    const Json payload = Json::parse(e.payload);
    if (e.type == "init") {
      if (!s.events_.empty()) throw Error(ErrorCode::kParse, "duplicate init event");
      const std::string fp = payload.value("corpus_fingerprint", "");
      if (!fp.empty() && fp != corpus->Fingerprint())
        throw Error(ErrorCode::kConflict, "event log was recorded against a different corpus");
      s.state_ = InitSession(corpus, FromJson<DiscoveryConfig>(payload.at("config")));
      s.state_.ucl_report.wall_seconds = payload.value("ucl_wall_seconds", 0.0);
    } else if (e.type == "feedback") {
      ProposeClusters(s.state_);  // cluster ids are validated against proposals
      cdi::ApplyFeedback(s.state_, FromJson<Feedback>(payload.at("feedback")));
    } else if (e.type == "advance") {
      cdi::AdvanceIteration(s.state_);
      if (auto it = payload.find("wall_seconds"); it != payload.end() && !s.state_.history.empty()) {
        auto &reports = s.state_.history.back().reports;
        for (std::size_t i = 0; i < reports.size() && i < it->size(); ++i)
          reports[i].wall_seconds = (*it)[i].get<double>();
      }
    } else if (e.type == "finalize") {
      cdi::Finalize(s.state_);
    } else {
      throw Error(ErrorCode::kParse, "unknown event type '" + e.type + "'");
    }
    if (auto it = payload.find("digest"); it != payload.end() && it->get<std::string>() != StateDigest(s.state_))
      throw Error(ErrorCode::kConflict, "replay diverged from the recorded state at a '" + e.type + "' event");
    s.events_.push_back(e);
  }
  if (log_path) s.log_.emplace(*log_path);
  return s;
}

const std::vector<ClusterProposal> &DiscoverySession::Propose() { return ProposeClusters(state_); }

void DiscoverySession::ApplyFeedback(const Feedback &feedback, const std::string &request_id) {
  // Feedback is validated against the cluster ids the user saw.
  ProposeClusters(state_);
  cdi::ApplyFeedback(state_, feedback);
  Json payload = {{"feedback", ToJson(feedback)}, {"digest", StateDigest(state_)}};
  Record({"feedback", {}, payload.dump(), state_.config.seed, request_id});
}

AdvanceOutcome DiscoverySession::Advance(const std::string &request_id) {
  const std::uint64_t seed = IterationSeed(state_);
  AdvanceOutcome out = cdi::AdvanceIteration(state_);
  if (!out.advanced) return out;
  Json payload = {{"iteration", state_.history.back().iteration},
                  {"wall_seconds", WallSeconds(state_.history.back())},
                  {"digest", StateDigest(state_)}};
  Record({"advance", {}, payload.dump(), seed, request_id});
  return out;
}

void DiscoverySession::Finalize(const std::string &request_id) {
  cdi::Finalize(state_);
  Json payload = {{"digest", StateDigest(state_)}};
  Record({"finalize", {}, payload.dump(), state_.config.seed, request_id});
}

bool DiscoverySession::SeenRequest(const std::string &request_id) const {
  if (request_id.empty()) return false;
  return std::any_of(events_.begin(), events_.end(),
                     [&](const SessionEvent &e) { return e.request_id == request_id; });
}

void DiscoverySession::Record(SessionEvent event) {
  event.timestamp = UtcTimestamp();
  if (log_) log_->Append(event);
  events_.push_back(std::move(event));
}

OracleRunResult RunOracleDiscovery(DiscoverySession &session) {
  OracleRunResult result;
  const Corpus &corpus = *session.state().corpus;
  if (!corpus.HasAllGoldLabels())
    throw Error(ErrorCode::kMissingGoldLabels, "oracle discovery needs gold labels for every utterance");
  result.gold_intents = corpus.vocab().size();

  while (session.state().status == SessionStatus::kAwaitingFeedback) {
    const TerminationDecision t = ShouldTerminate(session.state());
    if (t.terminate) {
      result.termination_reason = t.reason;
      break;
    }
    const std::vector<ClusterProposal> proposals = session.Propose();
    if (session.state().status != SessionStatus::kAwaitingFeedback) break;
    const Feedback fb = SimulatedOracle(session.state(), proposals);
    for (const auto &c : fb.clusters)
      for (const auto &id : c.accepted)
        if (corpus.utterance(*corpus.IndexOf(id)).gold_label != c.intent) result.pure = false;
    session.ApplyFeedback(fb);
    const AdvanceOutcome out = session.Advance();
    if (!out.advanced) {
      result.termination_reason = "no progress: " + out.warning;
      break;
    }
  }
  const SessionState &state = session.state();
  if (result.termination_reason.empty()) result.termination_reason = state.termination_reason;
  result.history = state.history;
  result.iterations = state.history.size();
  result.discovered = state.intents.size();
  if (!state.history.empty()) result.final_scores = state.history.back().stage2;
  return result;
}

}  // namespace cdi

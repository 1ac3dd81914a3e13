// core/src/serialization.cpp

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

#include "cdi/serialization.hpp"

#include <cmath>
#include <map>

#include "cdi/error.hpp"

namespace cdi {

namespace {

// NaN and infinities are not JSON; they travel as null.
Json Number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

template <typename T>
void Read(const Json &j, const char *key, T &out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kParse, std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
void Read(const Json &j, const char *key, std::optional<T> &out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_null()) {
    out.reset();
    return;
  }
  T v{};
  Read(j, key, v);
  out = v;
}

void RequireObject(const Json &j, const char *what) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, std::string(what) + " must be a JSON object");
}

template <typename T>
Json Optional(const std::optional<T> &v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

Json ToJson(const TrainConfig &cfg) {
  return {{"tau", cfg.tau},
          {"lambda", cfg.lambda},
          {"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed}};
}

void FromJson(const Json &j, TrainConfig &cfg) {
  RequireObject(j, "train config");
  Read(j, "tau", cfg.tau);
  Read(j, "lambda", cfg.lambda);
  Read(j, "learning_rate", cfg.learning_rate);
  Read(j, "batch_size", cfg.batch_size);
  Read(j, "epochs", cfg.epochs);
  Read(j, "seed", cfg.seed);
}

Json ToJson(const PipelineConfig &cfg) {
  return {{"train", ToJson(cfg.train)},
          {"ucl_epochs", Optional(cfg.ucl_epochs)},
          {"stage1_epochs", Optional(cfg.stage1_epochs)},
          {"stage2_epochs", Optional(cfg.stage2_epochs)},
          {"stage2_max_rounds", cfg.stage2_max_rounds},
          {"stage2_change_tol", cfg.stage2_change_tol},
          {"kmeans_restarts", cfg.kmeans_restarts},
          {"fixed_k", Optional(cfg.fixed_k)},
          {"k_prime", cfg.k_prime},
          {"allow_unsupervised_stage2", cfg.allow_unsupervised_stage2},
          {"eval_seed", cfg.eval_seed}};
}

void FromJson(const Json &j, PipelineConfig &cfg) {
  RequireObject(j, "pipeline config");
  if (auto it = j.find("train"); it != j.end()) FromJson(*it, cfg.train);
  Read(j, "ucl_epochs", cfg.ucl_epochs);
  Read(j, "stage1_epochs", cfg.stage1_epochs);
  Read(j, "stage2_epochs", cfg.stage2_epochs);
  Read(j, "stage2_max_rounds", cfg.stage2_max_rounds);
  Read(j, "stage2_change_tol", cfg.stage2_change_tol);
  Read(j, "kmeans_restarts", cfg.kmeans_restarts);
  Read(j, "fixed_k", cfg.fixed_k);
  Read(j, "k_prime", cfg.k_prime);
  Read(j, "allow_unsupervised_stage2", cfg.allow_unsupervised_stage2);
  Read(j, "eval_seed", cfg.eval_seed);
}

Json ToJson(const DiscoveryConfig &cfg) {
  return {{"gamma_first", cfg.gamma_first},
          {"gamma_rest", cfg.gamma_rest},
          {"top_fraction", cfg.top_fraction},
          {"top_window", cfg.top_window},
          {"k_prime", cfg.k_prime},
          {"fixed_k", Optional(cfg.fixed_k)},
          {"patience", cfg.patience},
          {"max_iterations", cfg.max_iterations},
          {"mode", std::string(ModeName(cfg.mode))},
          {"hidden_dim", cfg.hidden_dim},
          {"dropout_rate", cfg.dropout_rate},
          {"seed", cfg.seed},
          {"pipeline", ToJson(cfg.pipeline)}};
}

void FromJson(const Json &j, DiscoveryConfig &cfg) {
  RequireObject(j, "discovery config");
  Read(j, "gamma_first", cfg.gamma_first);
  Read(j, "gamma_rest", cfg.gamma_rest);
  Read(j, "top_fraction", cfg.top_fraction);
  Read(j, "top_window", cfg.top_window);
  Read(j, "k_prime", cfg.k_prime);
  Read(j, "fixed_k", cfg.fixed_k);
  Read(j, "patience", cfg.patience);
  Read(j, "max_iterations", cfg.max_iterations);
  std::string mode;
  Read(j, "mode", mode);
  if (mode == "oracle") {
    cfg.mode = DiscoveryMode::kOracle;
  } else if (mode == "interactive") {
    cfg.mode = DiscoveryMode::kInteractive;
  } else if (!mode.empty()) {
    throw Error(ErrorCode::kParse, "unknown discovery mode '" + mode + "'");
  }
  Read(j, "hidden_dim", cfg.hidden_dim);
  Read(j, "dropout_rate", cfg.dropout_rate);
  Read(j, "seed", cfg.seed);
  if (auto it = j.find("pipeline"); it != j.end()) FromJson(*it, cfg.pipeline);
}

Json ToJson(const ClusteringScores &scores) {
  return {{"acc", Number(scores.acc)}, {"ari", Number(scores.ari)}, {"nmi", Number(scores.nmi)}};
}

void FromJson(const Json &j, ClusteringScores &scores) {
  RequireObject(j, "scores");
  Read(j, "acc", scores.acc);
  Read(j, "ari", scores.ari);
  Read(j, "nmi", scores.nmi);
}

Json ToJson(const StageReport &r) {
  Json losses = Json::array();
  for (double l : r.epoch_losses) losses.push_back(Number(l));
  Json changes = Json::array();
  for (double c : r.change_fractions) changes.push_back(c);
  return {{"stage", r.stage},
          {"epochs_run", r.epochs_run},
          {"epoch_losses", std::move(losses)},
          {"final_loss", r.final_loss ? Number(*r.final_loss) : Json(nullptr)},
          {"wall_seconds", r.wall_seconds},
          {"metrics", r.metrics ? ToJson(*r.metrics) : Json(nullptr)},
          {"seed", r.seed},
          {"head_index", Optional(r.head_index)},
          {"rounds", r.rounds},
          {"change_fractions", std::move(changes)},
          {"stopped_early", r.stopped_early}};
}

void FromJson(const Json &j, StageReport &r) {
  RequireObject(j, "stage report");
  Read(j, "stage", r.stage);
  Read(j, "epochs_run", r.epochs_run);
  if (auto it = j.find("epoch_losses"); it != j.end() && it->is_array()) {
    r.epoch_losses.clear();
    for (const auto &v : *it) r.epoch_losses.push_back(v.is_null() ? std::nan("") : v.get<double>());
  }
  Read(j, "final_loss", r.final_loss);
  Read(j, "wall_seconds", r.wall_seconds);
  if (auto it = j.find("metrics"); it != j.end() && !it->is_null()) r.metrics = FromJson<ClusteringScores>(*it);
  Read(j, "seed", r.seed);
  Read(j, "head_index", r.head_index);
  Read(j, "rounds", r.rounds);
  Read(j, "change_fractions", r.change_fractions);
  Read(j, "stopped_early", r.stopped_early);
}

Json ToJson(const IterationRecord &r) {
  Json reports = Json::array();
  for (const auto &s : r.reports) reports.push_back(ToJson(s));
  return {{"iteration", r.iteration},
          {"k", r.k},
          {"k_next", r.k_next},
          {"num_intents", r.num_intents},
          {"labeled_count", r.labeled_count},
          {"labeled_fraction", r.labeled_fraction},
          {"stage1", r.stage1 ? ToJson(*r.stage1) : Json(nullptr)},
          {"stage2", r.stage2 ? ToJson(*r.stage2) : Json(nullptr)},
          {"reports", std::move(reports)}};
}

void FromJson(const Json &j, IterationRecord &r) {
  RequireObject(j, "iteration record");
  Read(j, "iteration", r.iteration);
  Read(j, "k", r.k);
  Read(j, "k_next", r.k_next);
  Read(j, "num_intents", r.num_intents);
  Read(j, "labeled_count", r.labeled_count);
  Read(j, "labeled_fraction", r.labeled_fraction);
  if (auto it = j.find("stage1"); it != j.end() && !it->is_null()) r.stage1 = FromJson<ClusteringScores>(*it);
  if (auto it = j.find("stage2"); it != j.end() && !it->is_null()) r.stage2 = FromJson<ClusteringScores>(*it);
  if (auto it = j.find("reports"); it != j.end() && it->is_array()) {
    r.reports.clear();
    for (const auto &s : *it) r.reports.push_back(FromJson<StageReport>(s));
  }
}

Json ToJson(const ClusterProposal &p) {
  Json samples = Json::array();
  for (const auto &s : p.samples)
    samples.push_back({{"id", s.id}, {"text", s.text}, {"confidence", s.confidence}, {"x", s.x}, {"y", s.y}});
  Json members = Json::array();
  for (const auto &m : p.members) members.push_back({{"id", m.id}, {"x", m.x}, {"y", m.y}});
  return {{"cluster_id", p.cluster_id},
          {"size", p.size},
          {"samples", std::move(samples)},
          {"members", std::move(members)}};
}

Json ToJson(const Feedback &f) {
  Json clusters = Json::array();
  for (const auto &c : f.clusters)
    clusters.push_back(
        {{"cluster_id", c.cluster_id}, {"accepted", c.accepted}, {"rejected", c.rejected}, {"intent", c.intent}});
  return {{"clusters", std::move(clusters)}, {"merges", f.merges}};
}

void FromJson(const Json &j, Feedback &f) {
  RequireObject(j, "feedback");
  f = Feedback{};
  if (auto it = j.find("clusters"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorCode::kParse, "feedback 'clusters' must be an array");
    for (const auto &c : *it) {
      RequireObject(c, "cluster feedback");
      if (!c.contains("cluster_id")) throw Error(ErrorCode::kParse, "cluster feedback needs a cluster_id");
      ClusterFeedback cf;
      Read(c, "cluster_id", cf.cluster_id);
      Read(c, "accepted", cf.accepted);
      Read(c, "rejected", cf.rejected);
      Read(c, "intent", cf.intent);
      f.clusters.push_back(std::move(cf));
    }
  }
  Read(j, "merges", f.merges);
}

Json ToJson(const FeedbackViolation &v) {
  Json j = {{"kind", v.kind}, {"message", v.message}};
  if (v.id) j["id"] = *v.id;
  if (v.cluster_id) j["cluster_id"] = *v.cluster_id;
  return j;
}

Json ToJson(const KEstimate &e) {
  return {{"k", e.k},
          {"k_prime_used", e.k_prime_used},
          {"clamped", e.clamped},
          {"threshold", e.threshold},
          {"cluster_sizes", e.cluster_sizes}};
}

Json SessionSummary(const SessionState &state) {
  std::map<std::string, std::size_t> counts;
  for (const auto &a : state.assigned)
    if (a) ++counts[*a];
  Json intents = Json::array();
  for (const auto &name : state.intents) intents.push_back({{"name", name}, {"count", counts[name]}});
  const std::size_t labeled = state.labeled_count();
  return {{"corpus_size", state.assigned.size()},
          {"labeled_count", labeled},
          {"unlabeled_count", state.assigned.size() - labeled},
          {"labeled_fraction",
           state.assigned.empty() ? 0.0 : static_cast<double>(labeled) / static_cast<double>(state.assigned.size())},
          {"k_t", state.k_t},
          {"k_history", state.k_history},
          {"iteration", state.iteration},
          {"status", std::string(StatusName(state.status))},
          {"mode", std::string(ModeName(state.config.mode))},
          {"feedback_this_iteration", state.feedback_this_iteration},
          {"finalized", state.finalized},
          {"termination_reason", state.termination_reason},
          {"intents", std::move(intents)},
          {"k_estimate", state.k_estimate ? ToJson(*state.k_estimate) : Json(nullptr)},
          {"digest", StateDigest(state)}};
}

}  // namespace cdi

// core/include/cdi/discovery.hpp

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

#ifndef CDI_DISCOVERY_HPP_
#define CDI_DISCOVERY_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdi/corpus.hpp"
#include "cdi/encoder.hpp"
#include "cdi/error.hpp"
#include "cdi/metrics.hpp"
#include "cdi/pipeline.hpp"

namespace cdi {

enum class SessionStatus { kAwaitingFeedback, kTraining, kConverged };
enum class DiscoveryMode { kInteractive, kOracle };

std::string_view StatusName(SessionStatus status);
std::string_view ModeName(DiscoveryMode mode);

struct DiscoveryConfig {
  double gamma_first = 0.75;
  double gamma_rest = 0.95;
  double top_fraction = 0.75;
  std::size_t top_window = 20;
  std::size_t k_prime = 200;
  std::optional<std::size_t> fixed_k;
  // Interactive mode stops once k_t repeats this many times in a row.
  std::size_t patience = 2;
  std::size_t max_iterations = 50;
  DiscoveryMode mode = DiscoveryMode::kInteractive;
  std::size_t hidden_dim = 768;
  double dropout_rate = 0.1;
  PipelineConfig pipeline;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct RankedSample {
  std::string id;
  std::string text;
  double confidence = 0.0;
  double x = 0.0;  // 2-D projection
  double y = 0.0;
};

struct ProjectedPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

struct ClusterProposal {
  std::size_t cluster_id = 0;
  std::size_t size = 0;
  // Members with confidence > gamma, by confidence descending.
  std::vector<RankedSample> samples;
  // Every member, for the scatter view.
  std::vector<ProjectedPoint> members;
};

struct ClusterFeedback {
  std::size_t cluster_id = 0;
  std::vector<std::string> accepted;
  std::vector<std::string> rejected;
  std::string intent;
};

struct Feedback {
  std::vector<ClusterFeedback> clusters;
  std::vector<std::vector<std::size_t>> merges;  // cluster ids per merge group

  bool empty() const;
};

struct FeedbackViolation {
  std::string kind;
  std::string message;
  std::optional<std::string> id;
  std::optional<std::size_t> cluster_id;
};

class FeedbackError : public Error {
 public:
  explicit FeedbackError(std::vector<FeedbackViolation> violations);
  const std::vector<FeedbackViolation> &violations() const { return violations_; }

 private:
  std::vector<FeedbackViolation> violations_;
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t k = 0;       // k_t used for this iteration
  std::size_t k_next = 0;  // k_{t+1}
  std::size_t num_intents = 0;
  std::size_t labeled_count = 0;
  double labeled_fraction = 0.0;  // |D_L| / N
  std::optional<ClusteringScores> stage1;
  std::optional<ClusteringScores> stage2;
  std::vector<StageReport> reports;
};

struct SessionState {
  std::shared_ptr<const Corpus> corpus;
  // Intent per corpus row; nullopt means the row is in D_U.
  std::vector<std::optional<std::string>> assigned;
  std::vector<std::string> intents;  // insertion order
  std::size_t k_t = 1;
  std::size_t iteration = 1;
  EncoderParams params;
  std::vector<IterationRecord> history;
  std::vector<std::size_t> k_history;  // k_1, k_2, ...
  DiscoveryConfig config;
  SessionStatus status = SessionStatus::kAwaitingFeedback;
  bool feedback_this_iteration = false;
  bool finalized = false;
  std::string termination_reason;
  StageReport ucl_report;
  std::optional<KEstimate> k_estimate;
  // Cached for the current iteration.
  std::optional<std::vector<ClusterProposal>> proposals;

  std::size_t labeled_count() const;
  std::size_t unlabeled_count() const { return assigned.size() - labeled_count(); }
  std::vector<std::size_t> LabeledRows() const;
  std::vector<std::size_t> UnlabeledRows() const;
};

// ---- Operations --------------------------------------------------------------

// Empty D_L and I, UCL over the whole corpus, then k_1 from EstimateK on
// the representations unless config.fixed_k is set.
SessionState InitSession(std::shared_ptr<const Corpus> corpus, const DiscoveryConfig &config);

// Clusters D_U with k_t, filters by gamma (gamma_first on iteration 1,
// gamma_rest after), and sorts proposals by cluster size. Cached until the
// state changes. An empty D_U converges the session instead.
const std::vector<ClusterProposal> &ProposeClusters(SessionState &state);

// Answers from gold labels with the top-fraction / top-window rule.
Feedback SimulatedOracle(const SessionState &state, std::span<const ClusterProposal> proposals);

std::vector<FeedbackViolation> ValidateFeedback(const SessionState &state, const Feedback &feedback);

// Moves accepted ids from D_U to D_L. Throws FeedbackError on violations.
void ApplyFeedback(SessionState &state, const Feedback &feedback);

struct AdvanceOutcome {
  bool advanced = false;
  std::string warning;
};

// Stage 1 on D_L, stage 2 on every utterance with k_t, metrics, then
// k_{t+1} = max(k_t, |I|). A no-op (with a warning) before any feedback.
AdvanceOutcome AdvanceIteration(SessionState &state);

struct TerminationDecision {
  bool terminate = false;
  std::string reason;
};

TerminationDecision ShouldTerminate(const SessionState &state);

// User-requested stop.
void Finalize(SessionState &state);

// SHA-256 over every persistent field (labels, intents, k, iteration,
// status, history, parameter bits). Equal digests mean equal states.
std::string StateDigest(const SessionState &state);

// Top-2 principal component coordinates of the rows of `points`.
RowMatrix ProjectTo2d(const RowMatrix &points);

// ---- Event log and replay ----------------------------------------------------

struct SessionEvent {
  std::string type;       // "init", "feedback", "advance", "finalize"
  std::string timestamp;  // ISO-8601 UTC, informational
  std::string payload;    // JSON text
  std::uint64_t seed = 0;
  std::string request_id;
};

std::string EncodeEvent(const SessionEvent &event);
SessionEvent DecodeEvent(std::string_view line);

// Append-only JSON-lines file, fsync'ed per event.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path);
  void Append(const SessionEvent &event);
  static std::vector<SessionEvent> Read(const std::filesystem::path &path);
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// A session plus the events that produced it. Every mutation appends to the
// in-memory log and, when attached, to the on-disk log.
class DiscoverySession {
 public:
  static DiscoverySession Create(std::shared_ptr<const Corpus> corpus, const DiscoveryConfig &config,
                                 std::optional<std::filesystem::path> log_path = std::nullopt);
  static DiscoverySession Replay(std::shared_ptr<const Corpus> corpus,
                                 std::span<const SessionEvent> events,
                                 std::optional<std::filesystem::path> log_path = std::nullopt);

  const SessionState &state() const { return state_; }
  const std::vector<SessionEvent> &events() const { return events_; }

  const std::vector<ClusterProposal> &Propose();
  void ApplyFeedback(const Feedback &feedback, const std::string &request_id = {});
  AdvanceOutcome Advance(const std::string &request_id = {});
  void Finalize(const std::string &request_id = {});

  // Whether a mutation with this request id was already applied.
  bool SeenRequest(const std::string &request_id) const;

 private:
  DiscoverySession() = default;
  void Record(SessionEvent event);

  SessionState state_;
  std::vector<SessionEvent> events_;
  std::optional<EventLog> log_;
};

struct OracleRunResult {
  std::vector<IterationRecord> history;
  std::size_t iterations = 0;
  std::size_t discovered = 0;
  std::size_t gold_intents = 0;
  std::optional<ClusteringScores> final_scores;
  std::string termination_reason;
  bool pure = true;  // every accepted sample carried its gold label
};

// Drives propose -> oracle -> apply -> advance until termination.
OracleRunResult RunOracleDiscovery(DiscoverySession &session);

}  // namespace cdi

#endif  // CDI_DISCOVERY_HPP_

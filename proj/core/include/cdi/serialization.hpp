// core/include/cdi/serialization.hpp

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

#ifndef CDI_SERIALIZATION_HPP_
#define CDI_SERIALIZATION_HPP_

// JSON views of the public types, shared by the event log, the HTTP
// service and the command-line tool. Readers accept partial objects: absent
// keys keep their defaults.

#include "json.hpp"

#include "cdi/discovery.hpp"

namespace cdi {

using Json = nlohmann::ordered_json;

Json ToJson(const TrainConfig &cfg);
Json ToJson(const PipelineConfig &cfg);
Json ToJson(const DiscoveryConfig &cfg);
Json ToJson(const ClusteringScores &scores);
Json ToJson(const StageReport &report);
Json ToJson(const IterationRecord &record);
Json ToJson(const ClusterProposal &proposal);
Json ToJson(const Feedback &feedback);
Json ToJson(const FeedbackViolation &violation);
Json ToJson(const KEstimate &estimate);

// Counts, k_t, iteration, status, intents with label counts, digest.
Json SessionSummary(const SessionState &state);

void FromJson(const Json &j, TrainConfig &cfg);
void FromJson(const Json &j, PipelineConfig &cfg);
void FromJson(const Json &j, DiscoveryConfig &cfg);
void FromJson(const Json &j, ClusteringScores &scores);
void FromJson(const Json &j, StageReport &report);
void FromJson(const Json &j, IterationRecord &record);
void FromJson(const Json &j, Feedback &feedback);

template <typename T>
T FromJson(const Json &j) {
  T out{};
  FromJson(j, out);
  return out;
}

}  // namespace cdi

#endif  // CDI_SERIALIZATION_HPP_

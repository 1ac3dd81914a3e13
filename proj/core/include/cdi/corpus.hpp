// core/include/cdi/corpus.hpp

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

#ifndef CDI_CORPUS_HPP_
#define CDI_CORPUS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cdi/types.hpp"

namespace cdi {

struct Utterance {
  std::string id;
  std::string text;
  std::optional<std::string> gold_label;
};

// An immutable set of utterances with one float32 base embedding per row.
// Embeddings are kept in float32 so that load/save round-trips are exact;
// consumers widen to double with Points().
class Corpus {
 public:
  // Validates the invariants: N >= 1, dim >= 2, rows == N, finite values,
  // unique ids. Throws cdi::Error otherwise.
  Corpus(std::vector<Utterance> utterances, FloatRowMatrix embeddings);

  std::size_t size() const { return utterances_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(embeddings_.cols()); }

  const std::vector<Utterance> &utterances() const { return utterances_; }
  const Utterance &utterance(std::size_t i) const { return utterances_.at(i); }
  const FloatRowMatrix &embeddings() const { return embeddings_; }
  std::span<const float> embedding(std::size_t i) const;

  // Distinct gold labels in order of first appearance.
  const std::vector<std::string> &vocab() const { return vocab_; }
  bool HasAllGoldLabels() const;

  std::optional<std::size_t> IndexOf(std::string_view id) const;
  // Throws kNotFound for unknown ids.
  std::vector<std::size_t> IndicesOf(std::span<const std::string> ids) const;

  // All embeddings, or the given rows, widened to double.
  RowMatrix Points() const;
  RowMatrix Points(std::span<const std::size_t> rows) const;

  // Gold labels for the given rows; throws kMissingGoldLabels if any is null.
  std::vector<std::string> GoldLabels(std::span<const std::size_t> rows) const;

  // A new corpus holding the given rows, in the given order.
  Corpus Subset(std::span<const std::size_t> rows) const;

  // SHA-256 over the serialized dataset and embedding files, hex encoded.
  std::string Fingerprint() const;

 private:
  std::vector<Utterance> utterances_;
  FloatRowMatrix embeddings_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---- File formats -------------------------------------------------------

// CDIE: "CDIE", u32 version = 1, u32 count, u32 dim, then count*dim f32,
// everything little-endian, row-major.
inline constexpr char kCdieMagic[4] = {'C', 'D', 'I', 'E'};
inline constexpr std::uint32_t kCdieVersion = 1;

FloatRowMatrix ParseCdie(std::string_view bytes);
std::string SerializeCdie(const FloatRowMatrix &embeddings);
FloatRowMatrix ReadCdie(const std::filesystem::path &path);
void WriteCdie(const std::filesystem::path &path, const FloatRowMatrix &embeddings);

// JSON-lines with {"id", "text", "label"} objects. Errors name the line.
std::vector<Utterance> ParseDatasetJsonl(std::string_view text);
std::string SerializeDatasetJsonl(std::span<const Utterance> utterances);

Corpus LoadCorpus(const std::filesystem::path &dataset_path,
                  const std::filesystem::path &embeddings_path);
Corpus LoadCorpusFromMemory(std::string_view dataset_jsonl,
                            std::string_view embeddings_cdie);
void SaveCorpus(const Corpus &corpus, const std::filesystem::path &dataset_path,
                const std::filesystem::path &embeddings_path);

// ---- Known-ratio split ---------------------------------------------------

struct SplitSpec {
  double known_ratio = 0.5;
  double labeled_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct KnownRatioSplit {
  std::vector<std::string> labeled_ids;    // corpus order
  std::vector<std::string> unlabeled_ids;  // corpus order
  std::vector<std::string> known_intents;  // vocab order
};

// Picks ceil(known_ratio * |vocab|) known intents, then labeled_fraction of
// each known intent's utterances (at least one per intent). Deterministic in
// spec.seed.
KnownRatioSplit SplitKnownRatio(const Corpus &corpus, const SplitSpec &spec);

// ---- Synthetic fixtures --------------------------------------------------

struct BlobSpec {
  std::size_t n = 100;
  std::size_t k = 4;
  std::size_t dim = 64;
  double separation = 10.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
};

// k centers on a sphere of radius `separation`, utterance i drawn around
// center i mod k with isotropic Gaussian noise. Gold label is the center
// index in decimal.
Corpus MakeSyntheticBlobs(const BlobSpec &spec);

// The centers MakeSyntheticBlobs(spec) uses, k x dim.
RowMatrix SyntheticBlobCenters(const BlobSpec &spec);

}  // namespace cdi

#endif  // CDI_CORPUS_HPP_

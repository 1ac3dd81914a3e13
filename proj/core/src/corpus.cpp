// core/src/corpus.cpp

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

#include "cdi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "cdi/error.hpp"
#include "cdi/random.hpp"
#include "digest.hpp"
#include "json.hpp"

namespace cdi {

namespace internal {

std::string ReadFileBytes(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::filesystem::path &path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace internal

Corpus::Corpus(std::vector<Utterance> utterances, FloatRowMatrix embeddings)
    : utterances_(std::move(utterances)), embeddings_(std::move(embeddings)) {
  if (utterances_.empty())
    throw Error(ErrorCode::kInvalidArgument, "corpus must contain at least one utterance");
  if (embeddings_.cols() < 2)
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding dimension must be >= 2, got " + std::to_string(embeddings_.cols()));
  if (static_cast<std::size_t>(embeddings_.rows()) != utterances_.size())
    throw Error(ErrorCode::kCountMismatch,
                "embedding count " + std::to_string(embeddings_.rows()) +
                    " does not match utterance count " + std::to_string(utterances_.size()));
  for (Eigen::Index r = 0; r < embeddings_.rows(); ++r) {
    if (!embeddings_.row(r).allFinite())
      throw Error(ErrorCode::kNonFinite, "non-finite embedding value at row " + std::to_string(r));
  }
  std::unordered_set<std::string> seen_labels;
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    const auto &u = utterances_[i];
    if (!index_.emplace(u.id, i).second)
      throw Error(ErrorCode::kDuplicateId,
                  "duplicate id '" + u.id + "' at line " + std::to_string(i + 1));
    if (u.gold_label && seen_labels.insert(*u.gold_label).second) vocab_.push_back(*u.gold_label);
  }
}

std::span<const float> Corpus::embedding(std::size_t i) const {
  if (i >= size()) throw Error(ErrorCode::kNotFound, "row out of range");
  return {embeddings_.data() + i * dim(), dim()};
}

bool Corpus::HasAllGoldLabels() const {
  return std::all_of(utterances_.begin(), utterances_.end(),
                     [](const Utterance &u) { return u.gold_label.has_value(); });
}

std::optional<std::size_t> Corpus::IndexOf(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Corpus::IndicesOf(std::span<const std::string> ids) const {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto &id : ids) {
    auto idx = IndexOf(id);
    if (!idx) throw Error(ErrorCode::kNotFound, "unknown utterance id '" + id + "'");
    out.push_back(*idx);
  }
  return out;
}

RowMatrix Corpus::Points() const { return embeddings_.cast<double>(); }

RowMatrix Corpus::Points(std::span<const std::size_t> rows) const {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), embeddings_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw Error(ErrorCode::kNotFound, "row out of range");
    out.row(static_cast<Eigen::Index>(i)) =
        embeddings_.row(static_cast<Eigen::Index>(rows[i])).cast<double>();
  }
  return out;
}

std::vector<std::string> Corpus::GoldLabels(std::span<const std::size_t> rows) const {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto &u = utterance(r);
    if (!u.gold_label)
      throw Error(ErrorCode::kMissingGoldLabels, "utterance '" + u.id + "' has no gold label");
    out.push_back(*u.gold_label);
  }
  return out;
}

Corpus Corpus::Subset(std::span<const std::size_t> rows) const {
  std::vector<Utterance> utts;
  utts.reserve(rows.size());
  FloatRowMatrix emb(static_cast<Eigen::Index>(rows.size()), embeddings_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    utts.push_back(utterance(rows[i]));
    emb.row(static_cast<Eigen::Index>(i)) = embeddings_.row(static_cast<Eigen::Index>(rows[i]));
  }
  return Corpus(std::move(utts), std::move(emb));
}

std::string Corpus::Fingerprint() const {
  const std::string a = SerializeDatasetJsonl(utterances_);
  const std::string b = SerializeCdie(embeddings_);
  return internal::Sha256Hex({a, b});
}

FloatRowMatrix ParseCdie(std::string_view bytes) {
  internal::ByteReader in(bytes);
  if (in.remaining() < 16) throw Error(ErrorCode::kParse, "CDIE header truncated");
  if (in.Bytes(4) != std::string_view(kCdieMagic, 4))
    throw Error(ErrorCode::kParse, "bad CDIE magic at offset 0");
  const std::uint32_t version = in.U32();
  if (version != kCdieVersion)
    throw Error(ErrorCode::kParse, "unsupported CDIE version " + std::to_string(version));
  const std::uint32_t count = in.U32();
  const std::uint32_t dim = in.U32();
  const std::size_t expected = static_cast<std::size_t>(count) * dim * 4;
  if (in.remaining() != expected)
    throw Error(ErrorCode::kDimensionMismatch,
                "CDIE header declares " + std::to_string(count) + "x" + std::to_string(dim) +
                    " (" + std::to_string(expected) + " payload bytes) but payload at offset 16 has " +
                    std::to_string(in.remaining()) + " bytes");
  FloatRowMatrix m(count, dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c) {
      const std::size_t offset = in.offset();
      const float v = in.F32();
      if (!std::isfinite(v))
        throw Error(ErrorCode::kNonFinite, "non-finite embedding value at row " + std::to_string(r) +
                                               ", column " + std::to_string(c) + " (byte offset " +
                                               std::to_string(offset) + ")");
      m(r, c) = v;
    }
  }
  return m;
}

std::string SerializeCdie(const FloatRowMatrix &embeddings) {
  std::string out(kCdieMagic, 4);
  out.reserve(16 + static_cast<std::size_t>(embeddings.size()) * 4);
  internal::PutU32(out, kCdieVersion);
  internal::PutU32(out, static_cast<std::uint32_t>(embeddings.rows()));
  internal::PutU32(out, static_cast<std::uint32_t>(embeddings.cols()));
  for (Eigen::Index i = 0; i < embeddings.size(); ++i) internal::PutF32(out, embeddings.data()[i]);
  return out;
}

FloatRowMatrix ReadCdie(const std::filesystem::path &path) {
  return ParseCdie(internal::ReadFileBytes(path));
}

void WriteCdie(const std::filesystem::path &path, const FloatRowMatrix &embeddings) {
  internal::WriteFileBytes(path, SerializeCdie(embeddings));
}

std::vector<Utterance> ParseDatasetJsonl(std::string_view text) {
  std::vector<Utterance> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::string where = "dataset line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::kParse, where + ": " + e.what());
    }
    if (!obj.is_object()) throw Error(ErrorCode::kParse, where + ": expected a JSON object");
    if (!obj.contains("id") || !obj["id"].is_string())
      throw Error(ErrorCode::kParse, where + ": missing string field 'id'");
    Utterance u;
    u.id = obj["id"].get<std::string>();
    if (obj.contains("text")) {
      if (!obj["text"].is_string()) throw Error(ErrorCode::kParse, where + ": 'text' must be a string");
      u.text = obj["text"].get<std::string>();
    }
    if (obj.contains("label") && !obj["label"].is_null()) {
      if (!obj["label"].is_string())
        throw Error(ErrorCode::kParse, where + ": 'label' must be a string or null");
      u.gold_label = obj["label"].get<std::string>();
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::string SerializeDatasetJsonl(std::span<const Utterance> utterances) {
  std::string out;
  for (const auto &u : utterances) {
    nlohmann::json obj = {{"id", u.id}, {"text", u.text}};
    obj["label"] = u.gold_label ? nlohmann::json(*u.gold_label) : nlohmann::json(nullptr);
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

Corpus LoadCorpusFromMemory(std::string_view dataset_jsonl, std::string_view embeddings_cdie) {
  auto utterances = ParseDatasetJsonl(dataset_jsonl);
  auto embeddings = ParseCdie(embeddings_cdie);
  if (static_cast<std::size_t>(embeddings.rows()) != utterances.size())
    throw Error(ErrorCode::kCountMismatch,
                "CDIE header count " + std::to_string(embeddings.rows()) + " but dataset has " +
                    std::to_string(utterances.size()) + " lines");
  return Corpus(std::move(utterances), std::move(embeddings));
}

Corpus LoadCorpus(const std::filesystem::path &dataset_path,
                  const std::filesystem::path &embeddings_path) {
  return LoadCorpusFromMemory(internal::ReadFileBytes(dataset_path),
                              internal::ReadFileBytes(embeddings_path));
}

void SaveCorpus(const Corpus &corpus, const std::filesystem::path &dataset_path,
                const std::filesystem::path &embeddings_path) {
  internal::WriteFileBytes(dataset_path, SerializeDatasetJsonl(corpus.utterances()));
  WriteCdie(embeddings_path, corpus.embeddings());
}

namespace {

std::size_t CeilFraction(double fraction, std::size_t count) {
  // The epsilon keeps exact products such as 0.5 * 4 from rounding up.
  const double v = std::ceil(fraction * static_cast<double>(count) - 1e-9);
  return std::min(count, static_cast<std::size_t>(std::max(0.0, v)));
}

}  // namespace

KnownRatioSplit SplitKnownRatio(const Corpus &corpus, const SplitSpec &spec) {
  if (!(spec.known_ratio > 0.0 && spec.known_ratio <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "known_ratio must be in (0, 1]");
  if (!(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "labeled_fraction must be in (0, 1]");
  if (!corpus.HasAllGoldLabels())
    throw Error(ErrorCode::kMissingGoldLabels, "known-ratio split requires gold labels on every utterance");

  const auto &vocab = corpus.vocab();
  SplitMix64 rng(DeriveSeed(spec.seed, {0x6b6e6f776eULL}));
  std::vector<std::size_t> order(vocab.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Shuffle(std::span(order), rng);
  const std::size_t num_known = std::max<std::size_t>(1, CeilFraction(spec.known_ratio, vocab.size()));
  std::vector<bool> known(vocab.size(), false);
  for (std::size_t i = 0; i < num_known; ++i) known[order[i]] = true;

  std::unordered_map<std::string, std::size_t> label_index;
  for (std::size_t i = 0; i < vocab.size(); ++i) label_index.emplace(vocab[i], i);

  std::vector<std::vector<std::size_t>> members(vocab.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    members[label_index.at(*corpus.utterance(i).gold_label)].push_back(i);

  std::vector<bool> labeled(corpus.size(), false);
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    if (!known[c]) continue;
    SplitMix64 pick(DeriveSeed(spec.seed, {0x6c6162656cULL, c}));
    auto rows = members[c];
    Shuffle(std::span(rows), pick);
    const std::size_t take = CeilFraction(spec.labeled_fraction, rows.size());
    for (std::size_t i = 0; i < take; ++i) labeled[rows[i]] = true;
  }

  KnownRatioSplit out;
  for (std::size_t c = 0; c < vocab.size(); ++c)
    if (known[c]) out.known_intents.push_back(vocab[c]);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (labeled[i] ? out.labeled_ids : out.unlabeled_ids).push_back(corpus.utterance(i).id);
  return out;
}

namespace {

void CheckBlobSpec(const BlobSpec &spec) {
  if (spec.k < 1 || spec.n < spec.k)
    throw Error(ErrorCode::kInvalidArgument, "synthetic blobs need n >= k >= 1");
  if (spec.dim < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic blobs need dim >= 2");
  if (!(spec.separation >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "separation must be >= 0");
  if (!(spec.noise_sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_sigma must be > 0");
}

RowMatrix SampleCenters(const BlobSpec &spec, SplitMix64 &rng) {
  RowMatrix centers(spec.k, spec.dim);
  for (std::size_t c = 0; c < spec.k; ++c) {
    Vector dir(spec.dim);
    do {
      for (std::size_t j = 0; j < spec.dim; ++j) dir(j) = rng.Normal();
    } while (dir.norm() == 0.0);
    centers.row(c) = (spec.separation / dir.norm()) * dir.transpose();
  }
  return centers;
}

}  // namespace

RowMatrix SyntheticBlobCenters(const BlobSpec &spec) {
  CheckBlobSpec(spec);
  SplitMix64 rng(DeriveSeed(spec.seed, {0x626c6f62ULL}));
  return SampleCenters(spec, rng);
}

Corpus MakeSyntheticBlobs(const BlobSpec &spec) {
  CheckBlobSpec(spec);
  SplitMix64 rng(DeriveSeed(spec.seed, {0x626c6f62ULL}));
  const RowMatrix centers = SampleCenters(spec, rng);
  FloatRowMatrix emb(spec.n, spec.dim);
  std::vector<Utterance> utterances;
  utterances.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = i % spec.k;
    for (std::size_t j = 0; j < spec.dim; ++j)
      emb(i, j) = static_cast<float>(centers(c, j) + spec.noise_sigma * rng.Normal());
    utterances.push_back({"u" + std::to_string(i), "synthetic utterance " + std::to_string(i) +
                                                       " of intent " + std::to_string(c),
                          std::to_string(c)});
  }
  return Corpus(std::move(utterances), std::move(emb));
}

}  // namespace cdi

// tests/corpus_test.cpp

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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "cdi/corpus.hpp"
#include "cdi/error.hpp"

namespace cdi {
namespace {

namespace fs = std::filesystem;

template <typename F>
Error CatchError(F &&f) {
  try {
    f();
  } catch (const Error &e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorCode::kInvalidArgument, "");
}

std::string Jsonl(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i)
    s += R"({"id": "u)" + std::to_string(i) + R"(", "text": "utterance )" + std::to_string(i) +
         R"(", "label": )" + (i % 2 ? std::string("null") : "\"a\"") + "}\n";
  return s;
}

FloatRowMatrix Embeddings(std::size_t n, std::size_t dim) {
  FloatRowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 0.25f * static_cast<float>(i) - 1.0f / 3.0f;
  return m;
}

std::vector<std::size_t> AllRows(const Corpus &c) {
  std::vector<std::size_t> r(c.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

TEST(Corpus, LoadsMatchingFiles) {
  Corpus c = LoadCorpusFromMemory(Jsonl(3), SerializeCdie(Embeddings(3, 4)));
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c.dim(), 4u);
  EXPECT_EQ(c.utterance(1).id, "u1");
  EXPECT_FALSE(c.utterance(1).gold_label.has_value());
  EXPECT_EQ(c.vocab(), std::vector<std::string>{"a"});
  EXPECT_FALSE(c.HasAllGoldLabels());
  EXPECT_EQ(c.embedding(2)[0], Embeddings(3, 4)(2, 0));
}

TEST(Corpus, CdieLayoutIsLittleEndian) {
  FloatRowMatrix e = Embeddings(2, 3);
  std::string bytes = SerializeCdie(e);
  ASSERT_EQ(bytes.size(), 16u + 2 * 3 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "CDIE");
  auto u32 = [&](std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 3])) << 24;
  };
  EXPECT_EQ(u32(4), 1u);
  EXPECT_EQ(u32(8), 2u);
  EXPECT_EQ(u32(12), 3u);
  const std::uint32_t raw = u32(16 + 4 * 4);
  float f;
  std::memcpy(&f, &raw, 4);
  EXPECT_EQ(f, e(1, 1));
}

TEST(Corpus, RoundTripIsBitExact) {
  BlobSpec spec;
  spec.n = 50;
  spec.k = 3;
  spec.dim = 7;
  Corpus c = MakeSyntheticBlobs(spec);
  const fs::path dir = fs::temp_directory_path() / "cdi_corpus_roundtrip";
  fs::create_directories(dir);
  SaveCorpus(c, dir / "d.jsonl", dir / "e.cdie");
  Corpus back = LoadCorpus(dir / "d.jsonl", dir / "e.cdie");
  ASSERT_EQ(back.size(), c.size());
  EXPECT_EQ(std::memcmp(back.embeddings().data(), c.embeddings().data(), sizeof(float) * c.embeddings().size()), 0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back.utterance(i).id, c.utterance(i).id);
    EXPECT_EQ(back.utterance(i).text, c.utterance(i).text);
    EXPECT_EQ(back.utterance(i).gold_label, c.utterance(i).gold_label);
  }
  EXPECT_EQ(back.Fingerprint(), c.Fingerprint());
  fs::remove_all(dir);
}

TEST(Corpus, CountMismatch) {
  Error e = CatchError([] { LoadCorpusFromMemory(Jsonl(2), SerializeCdie(Embeddings(3, 4))); });
  EXPECT_EQ(e.code(), ErrorCode::kCountMismatch);
}

TEST(Corpus, NonFiniteNamesRow) {
  FloatRowMatrix e = Embeddings(3, 4);
  e(1, 2) = std::numeric_limits<float>::quiet_NaN();
  Error err = CatchError([&] { LoadCorpusFromMemory(Jsonl(3), SerializeCdie(e)); });
  EXPECT_EQ(err.code(), ErrorCode::kNonFinite);
  EXPECT_NE(std::string(err.what()).find("row 1"), std::string::npos) << err.what();
}

TEST(Corpus, DuplicateIds) {
  std::string lines = R"({"id": "x", "text": "a", "label": null})" "\n" R"({"id": "x", "text": "b", "label": null})" "\n";
  EXPECT_EQ(CatchError([&] { LoadCorpusFromMemory(lines, SerializeCdie(Embeddings(2, 3))); }).code(),
            ErrorCode::kDuplicateId);
}

TEST(Corpus, MalformedInputs) {
  Error e = CatchError([] { ParseDatasetJsonl("{\"id\": \"a\", \"text\": \"t\"}\n{not json}\n"); });
  EXPECT_EQ(e.code(), ErrorCode::kParse);
  EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  std::string bytes = SerializeCdie(Embeddings(2, 3));
  bytes[0] = 'X';
  EXPECT_EQ(CatchError([&] { ParseCdie(bytes); }).code(), ErrorCode::kParse);
  EXPECT_EQ(CatchError([&] { ParseCdie(SerializeCdie(Embeddings(2, 3)).substr(0, 20)); }).code(),
            ErrorCode::kDimensionMismatch);
  EXPECT_THROW(Corpus({{"a", "t", std::nullopt}}, FloatRowMatrix::Zero(1, 1)), Error);
}

TEST(Split, KnownRatioCeiling) {
  BlobSpec spec;
  spec.n = 40;
  spec.k = 4;
  Corpus c = MakeSyntheticBlobs(spec);
  SplitSpec s;
  s.known_ratio = 0.5;
  EXPECT_EQ(SplitKnownRatio(c, s).known_intents.size(), 2u);
  s.known_ratio = 0.3;
  EXPECT_EQ(SplitKnownRatio(c, s).known_intents.size(), 2u);
  s.known_ratio = 0.25;
  EXPECT_EQ(SplitKnownRatio(c, s).known_intents.size(), 1u);
}

TEST(Split, FullRatioLabelsEverything) {
  BlobSpec spec;
  spec.n = 30;
  spec.k = 3;
  Corpus c = MakeSyntheticBlobs(spec);
  SplitSpec s;
  s.known_ratio = 1.0;
  s.labeled_fraction = 1.0;
  KnownRatioSplit r = SplitKnownRatio(c, s);
  EXPECT_EQ(r.labeled_ids.size(), 30u);
  EXPECT_TRUE(r.unlabeled_ids.empty());
}

TEST(Split, PartitionProperties) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    BlobSpec spec;
    spec.n = 97;
    spec.k = 1 + seed % 7;
    spec.seed = seed;
    Corpus c = MakeSyntheticBlobs(spec);
    SplitSpec s;
    s.known_ratio = 0.1 + 0.045 * static_cast<double>(seed);
    s.labeled_fraction = 0.05 + 0.04 * static_cast<double>(seed);
    s.seed = seed;
    KnownRatioSplit r = SplitKnownRatio(c, s);
    std::set<std::string> lab(r.labeled_ids.begin(), r.labeled_ids.end());
    std::set<std::string> unl(r.unlabeled_ids.begin(), r.unlabeled_ids.end());
    std::set<std::string> known(r.known_intents.begin(), r.known_intents.end());
    EXPECT_EQ(lab.size() + unl.size(), c.size());
    for (const auto &id : lab) EXPECT_FALSE(unl.count(id));
    EXPECT_EQ(known.size(), static_cast<std::size_t>(std::ceil(s.known_ratio * static_cast<double>(c.vocab().size()) - 1e-9)));
    for (const auto &id : lab) EXPECT_TRUE(known.count(*c.utterance(*c.IndexOf(id)).gold_label));
    // At least one labeled utterance per known intent.
    std::set<std::string> covered;
    for (const auto &id : lab) covered.insert(*c.utterance(*c.IndexOf(id)).gold_label);
    EXPECT_EQ(covered, known);
  }
}

TEST(Split, DeterministicInSeed) {
  BlobSpec spec;
  spec.n = 200;
  spec.k = 8;
  Corpus c = MakeSyntheticBlobs(spec);
  SplitSpec s;
  s.seed = 3;
  KnownRatioSplit a = SplitKnownRatio(c, s), b = SplitKnownRatio(c, s);
  EXPECT_EQ(a.labeled_ids, b.labeled_ids);
  EXPECT_EQ(a.known_intents, b.known_intents);
  s.seed = 4;
  KnownRatioSplit d = SplitKnownRatio(c, s);
  EXPECT_TRUE(d.labeled_ids != a.labeled_ids || d.known_intents != a.known_intents);
}

TEST(Split, RequiresGoldLabels) {
  Corpus c = LoadCorpusFromMemory(Jsonl(4), SerializeCdie(Embeddings(4, 2)));
  EXPECT_EQ(CatchError([&] { SplitKnownRatio(c, SplitSpec{}); }).code(), ErrorCode::kMissingGoldLabels);
}

// Nearest-center classification over every point, checked against gold.
double NearestCenterAccuracy(const Corpus &c, const RowMatrix &centers) {
  const RowMatrix pts = c.Points();
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    Eigen::Index best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centers.rows(); ++j) {
      const double d = (pts.row(i) - centers.row(j)).squaredNorm();
      if (d < bd) bd = d, best = j;
    }
    hits += *c.utterance(static_cast<std::size_t>(i)).gold_label == std::to_string(best);
  }
  return static_cast<double>(hits) / static_cast<double>(pts.rows());
}

TEST(Blobs, SingleCluster) {
  BlobSpec spec;
  spec.n = 10;
  spec.k = 1;
  spec.dim = 5;
  Corpus c = MakeSyntheticBlobs(spec);
  EXPECT_EQ(c.dim(), 5u);
  EXPECT_EQ(c.vocab(), std::vector<std::string>{"0"});
}

TEST(Blobs, SeparatedCentersAreRecovered) {
  BlobSpec spec;
  spec.n = 100;
  spec.k = 4;
  spec.separation = 10.0;
  spec.noise_sigma = 0.1;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = seed;
    Corpus c = MakeSyntheticBlobs(spec);
    const RowMatrix centers = SyntheticBlobCenters(spec);
    EXPECT_NEAR(centers.row(0).norm(), 10.0, 1e-9);
    EXPECT_EQ(NearestCenterAccuracy(c, centers), 1.0);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(*c.utterance(i).gold_label, std::to_string(i % 4));
  }
}

TEST(Blobs, CoincidentCentersAreChance) {
  BlobSpec spec;
  spec.n = 100;
  spec.k = 4;
  spec.separation = 0.0;
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    total += NearestCenterAccuracy(MakeSyntheticBlobs(spec), SyntheticBlobCenters(spec));
  }
  // All distances tie, so every point goes to center 0: exactly a quarter.
  EXPECT_NEAR(total / 20.0, 0.25, 0.05);
}

TEST(Corpus, SubsetAndLookups) {
  BlobSpec spec;
  spec.n = 12;
  spec.k = 3;
  Corpus c = MakeSyntheticBlobs(spec);
  std::vector<std::size_t> rows = {5, 2, 9};
  Corpus s = c.Subset(rows);
  EXPECT_EQ(s.utterance(0).id, c.utterance(5).id);
  EXPECT_EQ(s.Points().row(2), c.Points().row(9));
  std::vector<std::string> ids = {c.utterance(9).id, c.utterance(2).id};
  EXPECT_EQ(c.IndicesOf(ids), (std::vector<std::size_t>{9, 2}));
  std::vector<std::string> bad = {"missing"};
  EXPECT_EQ(CatchError([&] { c.IndicesOf(bad); }).code(), ErrorCode::kNotFound);
  EXPECT_EQ(c.GoldLabels(AllRows(c)).size(), 12u);
}

}  // namespace
}  // namespace cdi

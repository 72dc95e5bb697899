// Copyright 2026 The vlnpairs Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "support.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/pretext.hpp"

namespace vlnpairs {
namespace {

namespace fs = std::filesystem;

MultimodalSequence sequence_for(const Trajectory& t, const std::string& text, int n = 4, int d = 8,
                                Granularity g = Granularity::Coarse) {
  return assemble(testing::verified_pair(t, text, g), StubFeatureProvider(3), WordTokenizer(), n, d);
}

MultimodalSequence random_sequence(Rng& rng, int k, const std::string& id, int n = 4, int d = 8) {
  return sequence_for(testing::random_trajectory(rng, k, id), "Start in the kitchen, then stop in the bedroom.", n, d);
}

// Independent statement of the layout: IMG every n+1 tokens, CLS/SEP framing.
void expect_layout(const MultimodalSequence& s) {
  const int n = s.regions_per_node;
  ASSERT_EQ(s.visual_tokens.size(), static_cast<std::size_t>(s.node_count() * (n + 1)));
  for (std::size_t i = 0; i < s.visual_tokens.size(); ++i) {
    const auto& t = s.visual_tokens[i];
    const bool img = i % static_cast<std::size_t>(n + 1) == 0;
    ASSERT_EQ(t.kind == VisualToken::Kind::Img, img) << i;
    ASSERT_EQ(t.node, static_cast<int>(i / static_cast<std::size_t>(n + 1)));
    if (!img) {
      ASSERT_EQ(t.features.size(), static_cast<std::size_t>(s.feature_dim));
      for (float f : t.features) ASSERT_TRUE(std::isfinite(f));
    }
  }
  ASSERT_GE(s.text_tokens.size(), 2u);
  EXPECT_EQ(s.text_tokens.front(), kClsToken);
  EXPECT_EQ(s.text_tokens.back(), kSepToken);
  EXPECT_EQ(s.validate(), "");
}

TEST(Assemble, ShapeExample) {
  const auto t = testing::make_trajectory({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}}, 2);
  const std::string text = "Start in the kitchen and go straight then stop in the bedroom.";  // 12 words
  const auto s = sequence_for(t, text, 4, 8);
  EXPECT_EQ(s.visual_tokens.size(), 10u);
  EXPECT_EQ(s.visual_tokens[0].kind, VisualToken::Kind::Img);
  EXPECT_EQ(s.visual_tokens[5].kind, VisualToken::Kind::Img);
  EXPECT_EQ(s.text_tokens.size(), 14u);
  EXPECT_EQ(s.word_count(), 12);
  EXPECT_EQ(s.node_keys, (std::vector<std::string>{"vid/f000", "vid/f003"}));
  expect_layout(s);
}

TEST(Assemble, Deterministic) {
  Rng a(1), b(1);
  EXPECT_EQ(random_sequence(a, 5, "x"), random_sequence(b, 5, "x"));
}

TEST(Assemble, ShapePropertyOverRandomPairs) {
  Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    const int n = static_cast<int>(rng.between(1, 6));
    const int d = static_cast<int>(rng.between(1, 16));
    const auto s = random_sequence(rng, static_cast<int>(rng.between(2, 7)), "t" + std::to_string(i), n, d);
    expect_layout(s);
  }
}

TEST(Assemble, Preconditions) {
  auto pair = testing::verified_pair(testing::make_trajectory({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}}),
                                     "Go.");
  pair.status = PairStatus::Rejected;
  EXPECT_THROW(assemble(pair, StubFeatureProvider(), WordTokenizer(), 4, 8), Error);

  struct Broken : FeatureProvider {
    std::vector<std::vector<float>> regions(const FrameRef&, int, int) const override { return {{1.0f}}; }
  };
  pair.status = PairStatus::Verified;
  try {
    assemble(pair, Broken(), WordTokenizer(), 4, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FeatureProviderUnavailable);
  }
}

TEST(Tokenizer, Words) {
  EXPECT_EQ(WordTokenizer().tokenize("Turn LEFT, then stop."),
            (std::vector<std::string>{"turn", "left", "then", "stop"}));
}

TEST(Mlm, ForcedMinimum) {
  const auto t = testing::make_trajectory({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}});
  const auto s = sequence_for(t, "one two three four five six seven eight nine ten eleven twelve.");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ex = make_mlm(s, 1e-9, seed);
    const auto& m = std::get<MlmExample>(ex.data);
    ASSERT_EQ(m.positions.size(), 1u);
  }
}

TEST(Mlm, MaskInvariants) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto t = testing::random_trajectory(rng, 3);
    const auto s = sequence_for(t, "Start in the kitchen, go straight into the hallway, then stop in the bedroom now.");
    const auto ex = make_mlm(s, 0.15, static_cast<std::uint64_t>(i));
    EXPECT_EQ(ex, make_mlm(s, 0.15, static_cast<std::uint64_t>(i)));
    const auto& m = std::get<MlmExample>(ex.data);
    ASSERT_EQ(m.positions.size(), m.originals.size());
    std::set<int> uniq(m.positions.begin(), m.positions.end());
    EXPECT_EQ(uniq.size(), m.positions.size());
    for (std::size_t j = 0; j < m.positions.size(); ++j) {
      const int p = m.positions[j];
      ASSERT_GT(p, 0);
      ASSERT_LT(p, static_cast<int>(s.text_tokens.size()) - 1);
      EXPECT_EQ(m.sequence.text_tokens[p], kMaskToken);
      EXPECT_EQ(m.originals[j], s.text_tokens[p]);
    }
    expect_layout(m.sequence);
  }
}

TEST(Mvm, NeverMasksImgMarkers) {
  Rng rng(5);
  const auto s = random_sequence(rng, 4, "x", 3, 2);
  std::map<int, int> hits;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto ex = make_mvm(s, 0.3, seed);
    const auto& m = std::get<MvmExample>(ex.data);
    ASSERT_FALSE(m.positions.empty());
    for (std::size_t j = 0; j < m.positions.size(); ++j) {
      const auto p = static_cast<std::size_t>(m.positions[j]);
      ASSERT_EQ(m.sequence.visual_tokens[p].kind, VisualToken::Kind::Region);
      ASSERT_TRUE(m.sequence.visual_tokens[p].masked);
      ASSERT_EQ(m.originals[j], s.visual_tokens[p].features);
      for (float f : m.sequence.visual_tokens[p].features) ASSERT_EQ(f, 0.0f);
      ++hits[m.positions[j]];
    }
  }
  EXPECT_EQ(hits.size(), 12u);  // every region position gets masked at some point
}

TEST(Pij, TwoNodesIsTheSwap) {
  const auto t = testing::make_trajectory({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}});
  const auto s = sequence_for(t, "Go.");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [pos, neg] = make_pij(s, seed);
    const auto& p = std::get<PijExample>(pos.data);
    const auto& n = std::get<PijExample>(neg.data);
    EXPECT_TRUE(p.is_paired);
    EXPECT_FALSE(n.is_paired);
    EXPECT_EQ(p.sequence, s);
    EXPECT_EQ(n.sequence.node_keys, (std::vector<std::string>{s.node_keys[1], s.node_keys[0]}));
    EXPECT_EQ(n.sequence.text_tokens, s.text_tokens);
    expect_layout(n.sequence);
  }
}

TEST(Pij, NegativeNeverIdentity) {
  Rng rng(6);
  const auto s = random_sequence(rng, 4, "x");
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto [pos, neg] = make_pij(s, seed);
    const auto& n = std::get<PijExample>(neg.data).sequence;
    ASSERT_NE(n.node_keys, s.node_keys);
    ASSERT_NE(n.visual_tokens, s.visual_tokens);
    // The negative is a permutation of the positive's blocks.
    auto a = n.node_keys, b = s.node_keys;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ASSERT_EQ(a, b);
  }
}

TEST(Pij, IdenticalBlocksAreDegenerate) {
  Rng rng(7);
  auto s = random_sequence(rng, 3, "x");
  for (auto& k : s.node_keys) k = s.node_keys[0];
  const std::size_t block = static_cast<std::size_t>(s.regions_per_node + 1);
  for (std::size_t i = 0; i < s.visual_tokens.size(); ++i) {
    const int node = s.visual_tokens[i].node;
    s.visual_tokens[i] = s.visual_tokens[i % block];
    s.visual_tokens[i].node = node;
  }
  try {
    make_pij(s, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateTrajectory);
  }
}

TEST(Pr, TwoCandidates) {
  Rng rng(8);
  const auto s = random_sequence(rng, 3, "gold");
  std::set<int> gold_positions;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto ex = make_pr(s, {s}, 2, seed);
    const auto& p = std::get<PrExample>(ex.data);
    ASSERT_EQ(p.candidates.size(), 2u);
    ASSERT_TRUE(p.gold_index == 0 || p.gold_index == 1);
    EXPECT_EQ(p.candidates[static_cast<std::size_t>(p.gold_index)], s);
    EXPECT_NE(p.candidates[static_cast<std::size_t>(1 - p.gold_index)], s);
    gold_positions.insert(p.gold_index);
  }
  EXPECT_EQ(gold_positions.size(), 2u);
}

TEST(Pr, DistinctDistractorsOverBatch) {
  Rng rng(9);
  std::vector<MultimodalSequence> batch;
  for (int i = 0; i < 10; ++i) batch.push_back(random_sequence(rng, static_cast<int>(rng.between(2, 6)), "t" + std::to_string(i)));
  for (std::size_t g = 0; g < batch.size(); ++g) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto ex = make_pr(batch[g], batch, 4, seed);
      const auto& p = std::get<PrExample>(ex.data);
      ASSERT_EQ(p.candidates.size(), 4u);
      ASSERT_EQ(p.distractor_kinds.size(), 4u);
      EXPECT_EQ(p.distractor_kinds[static_cast<std::size_t>(p.gold_index)], "gold");
      EXPECT_EQ(p.candidates[static_cast<std::size_t>(p.gold_index)], batch[g]);
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
          ASSERT_NE(p.candidates[i].node_keys, p.candidates[j].node_keys);
          ASSERT_NE(p.candidates[i].visual_tokens, p.candidates[j].visual_tokens);
        }
        expect_layout(p.candidates[i]);
      }
    }
  }
}

TEST(Pr, SubstitutionOnlySingleBatchIsInsufficient) {
  Rng rng(10);
  const auto s = random_sequence(rng, 3, "gold");
  try {
    make_pr(s, {s}, 2, 1, {false, false, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientDistractors);
  }
  EXPECT_THROW(make_pr(s, {s}, 1, 1), Error);
}

TEST(Build, CountsAndDeterminism) {
  Rng rng(11);
  std::vector<PathInstructionPair> pairs;
  for (int i = 0; i < 6; ++i) {
    auto p = testing::verified_pair(testing::random_trajectory(rng, static_cast<int>(rng.between(2, 5)),
                                                               "v-t" + std::to_string(i)),
                                    "Start in the kitchen, go straight, then stop in the bedroom.");
    if (i == 5) p.status = PairStatus::Rejected;
    pairs.push_back(std::move(p));
  }
  PretextConfig cfg;
  cfg.regions_per_node = 3;
  cfg.feature_dim = 4;
  cfg.seed = 21;
  PretextBuildStats stats;
  const auto examples = build_pretext_examples(pairs, StubFeatureProvider(1), WordTokenizer(), cfg, &stats);
  EXPECT_EQ(stats.counts["MLM"], 5);
  EXPECT_EQ(stats.counts["MVM"], 5);
  EXPECT_EQ(stats.counts["PIJ"], 10);
  EXPECT_EQ(stats.counts["PR"] + stats.skipped_pr, 5);
  EXPECT_EQ(examples.size(), static_cast<std::size_t>(20 + stats.counts["PR"]));
  for (const auto& ex : examples) EXPECT_NE(ex.source_pair_id, "v-t5/coarse");
  EXPECT_EQ(examples, build_pretext_examples(pairs, StubFeatureProvider(1), WordTokenizer(), cfg));
  EXPECT_NE(derive_seed(1, "a", "MLM"), derive_seed(1, "a", "MVM"));
}

TEST(PretextIo, RoundTrip) {
  Rng rng(12);
  std::vector<PathInstructionPair> pairs;
  for (int i = 0; i < 5; ++i) {
    pairs.push_back(testing::verified_pair(testing::random_trajectory(rng, 3, "v-t" + std::to_string(i)),
                                           "Start in the kitchen, turn left, then stop in the bedroom."));
  }
  PretextConfig cfg;
  cfg.regions_per_node = 2;
  cfg.feature_dim = 5;
  PretextBuildStats stats;
  const auto examples = build_pretext_examples(pairs, StubFeatureProvider(), WordTokenizer(), cfg, &stats);
  const auto dir = fs::temp_directory_path() / "vlnpairs_pretext_io";
  fs::remove_all(dir);
  const auto written = write_pretext_dataset(examples, dir.string(), cfg, stats);
  PretextManifest read_manifest;
  const auto back = read_pretext_dataset(dir.string(), &read_manifest);
  EXPECT_EQ(back, examples);
  EXPECT_EQ(read_manifest.counts, written.counts);
  EXPECT_EQ(read_manifest.config_hash, pretext_config_hash(cfg));
  EXPECT_EQ(read_manifest.config_hash.size(), 16u);

  // Byte-identical rewrite.
  const auto first = read_file((dir / "pretext.jsonl").string());
  write_pretext_dataset(back, dir.string(), cfg, stats);
  EXPECT_EQ(read_file((dir / "pretext.jsonl").string()), first);

  // Dropping a line breaks the manifest count check.
  std::ofstream(dir / "pretext.jsonl", std::ios::trunc) << first.substr(first.find('\n') + 1);
  try {
    read_pretext_dataset(dir.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaMismatch);
  }
  fs::remove_all(dir);
}

TEST(PretextConfig, Validation) {
  PretextConfig c;
  c.mask_prob = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.pr_candidates = 1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.regions_per_node = 0;
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace vlnpairs

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

#include "vlnpairs/pretext.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include "vlnpairs/error.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

std::vector<std::vector<float>> StubFeatureProvider::regions(const FrameRef& frame, int regions, int dim) const {
  Rng rng(seed_, hash64(frame.key()));
  std::vector<std::vector<float>> out(static_cast<std::size_t>(regions));
  for (auto& r : out) {
    r.resize(static_cast<std::size_t>(dim));
    for (auto& v : r) v = static_cast<float>(rng.unit() * 2.0 - 1.0);
  }
  return out;
}

std::vector<std::string> WordTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::string MultimodalSequence::validate() const {
  const int n = regions_per_node;
  const std::size_t block = static_cast<std::size_t>(n) + 1;
  if (n < 1 || feature_dim < 1) return "regions_per_node and feature_dim must be positive";
  if (visual_tokens.size() != node_keys.size() * block) return "visual length is not K*(n+1)";
  for (std::size_t i = 0; i < visual_tokens.size(); ++i) {
    const auto& t = visual_tokens[i];
    const int node = static_cast<int>(i / block);
    if (i % block == 0) {
      if (t.kind != VisualToken::Kind::Img || t.node != node || !t.features.empty() || t.masked) {
        return "expected IMG marker at visual position " + std::to_string(i);
      }
    } else {
      if (t.kind != VisualToken::Kind::Region || t.node != node ||
          t.region != static_cast<int>(i % block) - 1) {
        return "expected region token at visual position " + std::to_string(i);
      }
      if (t.features.size() != static_cast<std::size_t>(feature_dim)) {
        return "region at visual position " + std::to_string(i) + " has wrong dimension";
      }
      for (float v : t.features) {
        if (!std::isfinite(v)) return "non-finite feature at visual position " + std::to_string(i);
      }
    }
  }
  if (text_tokens.size() < 2 || text_tokens.front() != kClsToken || text_tokens.back() != kSepToken) {
    return "text must be [CLS] w_1..w_T [SEP]";
  }
  for (std::size_t i = 1; i + 1 < text_tokens.size(); ++i) {
    if (text_tokens[i] == kClsToken || text_tokens[i] == kSepToken) return "marker inside the word span";
  }
  return {};
}

void PretextConfig::validate() const {
  if (regions_per_node < 1) throw Error(ErrorCode::ConfigError, "regions_per_node must be >= 1");
  if (feature_dim < 1) throw Error(ErrorCode::ConfigError, "feature_dim must be >= 1");
  if (!(mask_prob > 0.0 && mask_prob < 1.0)) throw Error(ErrorCode::ConfigError, "mask_prob must lie in (0, 1)");
  if (pr_candidates < 2) throw Error(ErrorCode::ConfigError, "pr_candidates must be >= 2");
}

std::string_view PretextExample::variant_name() const {
  static constexpr std::string_view names[] = {"MLM", "MVM", "PIJ", "PR"};
  return names[data.index()];
}

MultimodalSequence assemble(const PathInstructionPair& pair, const FeatureProvider& features,
                            const Tokenizer& tokenizer, int regions_per_node, int feature_dim) {
  if (pair.status != PairStatus::Verified) {
    throw Error(ErrorCode::PreconditionViolated, "assemble: pair " + pair.pair_id() + " is not Verified");
  }
  if (regions_per_node < 1 || feature_dim < 1) {
    throw Error(ErrorCode::PreconditionViolated, "assemble: regions_per_node and feature_dim must be positive");
  }
  MultimodalSequence seq;
  seq.source_pair_id = pair.pair_id();
  seq.regions_per_node = regions_per_node;
  seq.feature_dim = feature_dim;
  int node = 0;
  for (const auto* room : pair.trajectory.room_nodes()) {
    auto regions = features.regions(room->frame, regions_per_node, feature_dim);
    if (regions.size() != static_cast<std::size_t>(regions_per_node)) {
      throw Error(ErrorCode::FeatureProviderUnavailable, "feature provider returned the wrong region count");
    }
    seq.node_keys.push_back(room->frame.key());
    seq.visual_tokens.push_back({VisualToken::Kind::Img, node, -1, false, {}});
    for (int r = 0; r < regions_per_node; ++r) {
      auto& f = regions[static_cast<std::size_t>(r)];
      if (f.size() != static_cast<std::size_t>(feature_dim)) {
        throw Error(ErrorCode::FeatureProviderUnavailable, "feature provider returned the wrong dimension");
      }
      seq.visual_tokens.push_back({VisualToken::Kind::Region, node, r, false, std::move(f)});
    }
    ++node;
  }
  seq.text_tokens.emplace_back(kClsToken);
  for (auto& w : tokenizer.tokenize(pair.instruction.text)) seq.text_tokens.push_back(std::move(w));
  seq.text_tokens.emplace_back(kSepToken);
  return seq;
}

namespace {

std::vector<int> draw_mask(const std::vector<int>& maskable, double mask_prob, Rng& rng) {
  std::vector<int> chosen;
  for (int pos : maskable) {
    if (rng.bernoulli(mask_prob)) chosen.push_back(pos);
  }
  if (chosen.empty()) chosen.push_back(maskable[rng.below(maskable.size())]);
  return chosen;
}

void check_mask_prob(double mask_prob) {
  if (!(mask_prob > 0.0 && mask_prob < 1.0)) {
    throw Error(ErrorCode::PreconditionViolated, "mask_prob must lie in (0, 1)");
  }
}

std::size_t block_size(const MultimodalSequence& s) { return static_cast<std::size_t>(s.regions_per_node) + 1; }

bool same_block(const MultimodalSequence& a, int i, const MultimodalSequence& b, int j) {
  if (a.node_keys[i] != b.node_keys[j] || a.regions_per_node != b.regions_per_node) return false;
  const std::size_t n = block_size(a);
  for (std::size_t r = 1; r < n; ++r) {
    if (a.visual_tokens[i * n + r].features != b.visual_tokens[j * n + r].features) return false;
  }
  return true;
}

struct BlockRef {
  int sequence;  // -1 = gold, otherwise index into the batch
  int node;
};

// Builds a sequence from blocks of the gold sequence and the batch, keeping
// the gold text.
MultimodalSequence compose(const MultimodalSequence& gold, const std::vector<MultimodalSequence>& batch,
                           const std::vector<BlockRef>& blocks) {
  MultimodalSequence out;
  out.source_pair_id = gold.source_pair_id;
  out.regions_per_node = gold.regions_per_node;
  out.feature_dim = gold.feature_dim;
  out.text_tokens = gold.text_tokens;
  const std::size_t n = block_size(gold);
  for (std::size_t pos = 0; pos < blocks.size(); ++pos) {
    const auto& src = blocks[pos].sequence < 0 ? gold : batch[static_cast<std::size_t>(blocks[pos].sequence)];
    const auto node = static_cast<std::size_t>(blocks[pos].node);
    out.node_keys.push_back(src.node_keys[node]);
    for (std::size_t r = 0; r < n; ++r) {
      VisualToken t = src.visual_tokens[node * n + r];
      t.node = static_cast<int>(pos);
      out.visual_tokens.push_back(std::move(t));
    }
  }
  return out;
}

std::string identity_of(const MultimodalSequence& gold, const std::vector<MultimodalSequence>& batch,
                        const std::vector<BlockRef>& blocks) {
  std::string id;
  for (const auto& b : blocks) {
    const auto& src = b.sequence < 0 ? gold : batch[static_cast<std::size_t>(b.sequence)];
    id += src.node_keys[static_cast<std::size_t>(b.node)];
    id += '\x1f';
  }
  return id;
}

}  // namespace

PretextExample make_mlm(const MultimodalSequence& seq, double mask_prob, std::uint64_t seed) {
  check_mask_prob(mask_prob);
  std::vector<int> maskable;
  for (int i = 1; i + 1 < static_cast<int>(seq.text_tokens.size()); ++i) maskable.push_back(i);
  if (maskable.empty()) throw Error(ErrorCode::PreconditionViolated, "make_mlm: no word tokens to mask");
  Rng rng(seed, 0x4d4c4d);
  MlmExample ex{seq, draw_mask(maskable, mask_prob, rng), {}};
  for (int pos : ex.positions) {
    auto& tok = ex.sequence.text_tokens[static_cast<std::size_t>(pos)];
    ex.originals.push_back(tok);
    tok = std::string(kMaskToken);
  }
  return {std::move(ex), seq.source_pair_id, seed};
}

PretextExample make_mvm(const MultimodalSequence& seq, double mask_prob, std::uint64_t seed) {
  check_mask_prob(mask_prob);
  std::vector<int> maskable;
  for (int i = 0; i < static_cast<int>(seq.visual_tokens.size()); ++i) {
    if (seq.visual_tokens[static_cast<std::size_t>(i)].kind == VisualToken::Kind::Region) maskable.push_back(i);
  }
  if (maskable.empty()) throw Error(ErrorCode::PreconditionViolated, "make_mvm: no region tokens to mask");
  Rng rng(seed, 0x4d564d);
  MvmExample ex{seq, draw_mask(maskable, mask_prob, rng), {}};
  for (int pos : ex.positions) {
    auto& tok = ex.sequence.visual_tokens[static_cast<std::size_t>(pos)];
    ex.originals.push_back(tok.features);
    std::fill(tok.features.begin(), tok.features.end(), 0.0f);
    tok.masked = true;
  }
  return {std::move(ex), seq.source_pair_id, seed};
}

std::pair<PretextExample, PretextExample> make_pij(const MultimodalSequence& seq, std::uint64_t seed) {
  const int k = seq.node_count();
  auto changes_blocks = [&](const std::vector<int>& perm) {
    for (int i = 0; i < k; ++i) {
      if (!same_block(seq, perm[static_cast<std::size_t>(i)], seq, i)) return true;
    }
    return false;
  };

  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  bool found = false;
  if (k >= 2) {
    Rng rng(seed, 0x50494a);
    for (int tries = 0; tries < 64 && !found; ++tries) {
      rng.shuffle(perm);
      found = changes_blocks(perm);
    }
    if (!found) {
      // Few distinct blocks: swap the first pair that differs.
      std::iota(perm.begin(), perm.end(), 0);
      for (int i = 0; i < k && !found; ++i) {
        for (int j = i + 1; j < k && !found; ++j) {
          if (!same_block(seq, i, seq, j)) {
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
            found = true;
          }
        }
      }
    }
  }
  if (!found) {
    throw Error(ErrorCode::DegenerateTrajectory,
                "make_pij: no permutation of " + seq.source_pair_id + " changes its node blocks");
  }

  std::vector<BlockRef> blocks;
  for (int p : perm) blocks.push_back({-1, p});
  MultimodalSequence negative = compose(seq, {}, blocks);
  return {PretextExample{PijExample{seq, true}, seq.source_pair_id, seed},
          PretextExample{PijExample{std::move(negative), false}, seq.source_pair_id, seed}};
}

PretextExample make_pr(const MultimodalSequence& gold, const std::vector<MultimodalSequence>& batch, int k,
                       std::uint64_t seed, const DistractorKinds& kinds) {
  if (k < 2) throw Error(ErrorCode::PreconditionViolated, "make_pr: k must be >= 2");
  const int nodes = gold.node_count();
  Rng rng(seed, 0x5052);

  struct Recipe {
    std::string kind;
    std::vector<BlockRef> blocks;
  };
  std::vector<Recipe> pool;
  std::set<std::string> seen{identity_of(gold, batch, [&] {
    std::vector<BlockRef> b;
    for (int i = 0; i < nodes; ++i) b.push_back({-1, i});
    return b;
  }())};
  auto offer = [&](std::string kind, std::vector<BlockRef> blocks) {
    if (seen.insert(identity_of(gold, batch, blocks)).second) pool.push_back({std::move(kind), std::move(blocks)});
  };

  if (kinds.shuffle && nodes >= 2) {
    std::vector<int> perm(static_cast<std::size_t>(nodes));
    std::iota(perm.begin(), perm.end(), 0);
    auto emit = [&] {
      std::vector<BlockRef> b;
      for (int p : perm) b.push_back({-1, p});
      offer("shuffle", std::move(b));
    };
    if (nodes <= 5) {
      while (std::next_permutation(perm.begin(), perm.end())) emit();
    } else {
      for (int i = 0; i < 48; ++i) {
        rng.shuffle(perm);
        emit();
      }
    }
  }
  if (kinds.truncate && nodes >= 2) {
    std::vector<BlockRef> b;
    for (int i = 0; i + 1 < nodes; ++i) b.push_back({-1, i});
    offer("truncate", std::move(b));
  }
  if (kinds.substitute) {
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const auto& other = batch[s];
      if (other.node_keys == gold.node_keys) continue;  // gold itself or the same trajectory
      for (int pos = 0; pos < nodes; ++pos) {
        for (int j = 0; j < other.node_count(); ++j) {
          if (other.node_keys[static_cast<std::size_t>(j)] == gold.node_keys[static_cast<std::size_t>(pos)]) continue;
          std::vector<BlockRef> b;
          for (int i = 0; i < nodes; ++i) b.push_back({-1, i});
          b[static_cast<std::size_t>(pos)] = {static_cast<int>(s), j};
          offer("substitute", std::move(b));
        }
      }
    }
  }

  if (pool.size() < static_cast<std::size_t>(k - 1)) {
    throw Error(ErrorCode::InsufficientDistractors, "make_pr: " + std::to_string(pool.size()) +
                                                        " distinct distractors available, need " +
                                                        std::to_string(k - 1));
  }
  rng.shuffle(pool);
  const int gold_index = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));

  PrExample ex;
  ex.gold_index = gold_index;
  std::size_t next = 0;
  for (int c = 0; c < k; ++c) {
    if (c == gold_index) {
      ex.candidates.push_back(gold);
      ex.distractor_kinds.emplace_back("gold");
      continue;
    }
    const auto& recipe = pool[next++];
    ex.candidates.push_back(compose(gold, batch, recipe.blocks));
    ex.distractor_kinds.push_back(recipe.kind);
  }
  return {std::move(ex), gold.source_pair_id, seed};
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view pair_id, std::string_view variant) {
  return hash64(std::to_string(seed) + "/" + std::string(pair_id) + "/" + std::string(variant));
}

std::vector<PretextExample> build_pretext_examples(const std::vector<PathInstructionPair>& pairs,
                                                   const FeatureProvider& features, const Tokenizer& tokenizer,
                                                   const PretextConfig& config, PretextBuildStats* stats) {
  config.validate();
  std::vector<MultimodalSequence> sequences;
  for (const auto& p : pairs) {
    if (p.status != PairStatus::Verified) continue;
    sequences.push_back(assemble(p, features, tokenizer, config.regions_per_node, config.feature_dim));
  }
  PretextBuildStats local;
  std::vector<PretextExample> out;
  for (const auto& seq : sequences) {
    const auto& id = seq.source_pair_id;
    out.push_back(make_mlm(seq, config.mask_prob, derive_seed(config.seed, id, "MLM")));
    out.push_back(make_mvm(seq, config.mask_prob, derive_seed(config.seed, id, "MVM")));
    ++local.counts["MLM"];
    ++local.counts["MVM"];
    try {
      auto [pos, neg] = make_pij(seq, derive_seed(config.seed, id, "PIJ"));
      out.push_back(std::move(pos));
      out.push_back(std::move(neg));
      local.counts["PIJ"] += 2;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateTrajectory) throw;
      ++local.skipped_pij;
    }
    try {
      out.push_back(make_pr(seq, sequences, config.pr_candidates, derive_seed(config.seed, id, "PR")));
      ++local.counts["PR"];
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientDistractors) throw;
      ++local.skipped_pr;
    }
  }
  if (stats) *stats = std::move(local);
  return out;
}

}  // namespace vlnpairs

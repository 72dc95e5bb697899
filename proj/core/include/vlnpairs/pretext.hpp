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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "vlnpairs/types.hpp"

namespace vlnpairs {

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::string_view kImgToken = "[IMG]";

// Region features for one room-node image.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  /// `regions` vectors of `dim` finite values. Error(FeatureProviderUnavailable) on failure.
  virtual std::vector<std::vector<float>> regions(const FrameRef& frame, int regions, int dim) const = 0;
};

// Pseudo-features seeded from a hash of the frame key, uniform in [-1, 1).
class StubFeatureProvider : public FeatureProvider {
 public:
  explicit StubFeatureProvider(std::uint64_t seed = 0) : seed_(seed) {}
  std::vector<std::vector<float>> regions(const FrameRef& frame, int regions, int dim) const override;

 private:
  std::uint64_t seed_;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
};

// Lowercased words split on whitespace and punctuation (punctuation dropped).
class WordTokenizer : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
};

struct VisualToken {
  enum class Kind { Img, Region };

  Kind kind = Kind::Img;
  int node = 0;          // room-node ordinal
  int region = -1;       // 0..n-1 for regions, -1 for the IMG marker
  bool masked = false;   // MVM: features zeroed, originals stored in the example
  std::vector<float> features;

  friend bool operator==(const VisualToken&, const VisualToken&) = default;
};

// Visual input [IMG] r_1 .. r_n per room node, text input [CLS] w_1 .. w_T [SEP].
struct MultimodalSequence {
  std::string source_pair_id;
  int regions_per_node = 0;
  int feature_dim = 0;
  std::vector<std::string> node_keys;  // frame key per visual block, in block order
  std::vector<VisualToken> visual_tokens;
  std::vector<std::string> text_tokens;

  int node_count() const { return static_cast<int>(node_keys.size()); }
  int word_count() const { return static_cast<int>(text_tokens.size()) - 2; }
  /// Empty if every layout invariant holds, otherwise the first violation.
  std::string validate() const;

  friend bool operator==(const MultimodalSequence&, const MultimodalSequence&) = default;
};

struct PretextConfig {
  int regions_per_node = 36;
  int feature_dim = 2048;
  double mask_prob = 0.15;
  int pr_candidates = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Room nodes only (transitions excluded). Error(PreconditionViolated) if the
/// pair is not Verified.
MultimodalSequence assemble(const PathInstructionPair& pair, const FeatureProvider& features,
                            const Tokenizer& tokenizer, int regions_per_node, int feature_dim);

struct MlmExample {
  MultimodalSequence sequence;  // masked words replaced by [MASK]
  std::vector<int> positions;   // indices into text_tokens
  std::vector<std::string> originals;

  friend bool operator==(const MlmExample&, const MlmExample&) = default;
};

struct MvmExample {
  MultimodalSequence sequence;  // masked regions zeroed and flagged
  std::vector<int> positions;   // indices into visual_tokens
  std::vector<std::vector<float>> originals;

  friend bool operator==(const MvmExample&, const MvmExample&) = default;
};

struct PijExample {
  MultimodalSequence sequence;
  bool is_paired = true;

  friend bool operator==(const PijExample&, const PijExample&) = default;
};

struct PrExample {
  std::vector<MultimodalSequence> candidates;
  int gold_index = 0;
  std::vector<std::string> distractor_kinds;  // parallel to candidates; "gold" at gold_index

  friend bool operator==(const PrExample&, const PrExample&) = default;
};

struct PretextExample {
  std::variant<MlmExample, MvmExample, PijExample, PrExample> data;
  std::string source_pair_id;
  std::uint64_t seed = 0;

  /// "MLM", "MVM", "PIJ" or "PR".
  std::string_view variant_name() const;

  friend bool operator==(const PretextExample&, const PretextExample&) = default;
};

/// Each word token masked independently with mask_prob, at least one forced.
/// mask_prob must lie in (0, 1).
PretextExample make_mlm(const MultimodalSequence& seq, double mask_prob, std::uint64_t seed);
/// Same over region tokens; IMG markers are never masked.
PretextExample make_mvm(const MultimodalSequence& seq, double mask_prob, std::uint64_t seed);

/// Positive (the sequence as is) and negative (room-node blocks permuted by
/// a seeded non-identity permutation that changes the block sequence).
/// Error(DegenerateTrajectory) when every block is identical.
std::pair<PretextExample, PretextExample> make_pij(const MultimodalSequence& seq, std::uint64_t seed);

struct DistractorKinds {
  bool shuffle = true;
  bool truncate = true;
  bool substitute = true;
};

/// Gold plus k-1 distinct distractors drawn from node-order shuffles,
/// truncation by one room node, and single-node substitution with a room
/// node from another sequence in `batch`. Error(InsufficientDistractors) if
/// the pool is too small.
PretextExample make_pr(const MultimodalSequence& gold, const std::vector<MultimodalSequence>& batch, int k,
                       std::uint64_t seed, const DistractorKinds& kinds = {});

/// Per-example seed derived from the build seed, the pair id and the variant.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view pair_id, std::string_view variant);

struct PretextBuildStats {
  std::map<std::string, int> counts;  // per variant
  int skipped_pr = 0;                 // InsufficientDistractors
  int skipped_pij = 0;                // DegenerateTrajectory
};

/// MLM, MVM, PIJ (positive + negative) and PR examples for every Verified
/// pair; Rejected pairs are ignored. Deterministic for a fixed config.
std::vector<PretextExample> build_pretext_examples(const std::vector<PathInstructionPair>& pairs,
                                                   const FeatureProvider& features, const Tokenizer& tokenizer,
                                                   const PretextConfig& config, PretextBuildStats* stats = nullptr);

// Pretext dataset container: `<dir>/pretext.jsonl` (one example per line,
// features as base64 little-endian float32) and `<dir>/pretext_manifest.json`
// (counts per variant, seed, config hash).
struct PretextManifest {
  int schema_version = 1;
  std::map<std::string, int> counts;
  std::uint64_t seed = 0;
  std::string config_hash;
  int skipped_pr = 0;
  int skipped_pij = 0;
};

std::string pretext_config_hash(const PretextConfig& config);
PretextManifest write_pretext_dataset(const std::vector<PretextExample>& examples, const std::string& directory,
                                      const PretextConfig& config, const PretextBuildStats& stats = {});
std::vector<PretextExample> read_pretext_dataset(const std::string& directory, PretextManifest* manifest = nullptr);

}  // namespace vlnpairs

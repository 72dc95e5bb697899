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

#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "vlnpairs/gateway.hpp"
#include "vlnpairs/lexicon.hpp"
#include "vlnpairs/promptgen.hpp"
#include "vlnpairs/types.hpp"

namespace vlnpairs {

class ImageSource;

struct CleanupRule {
  std::string rule_id;
  std::string pattern;  // ECMAScript regular expression
  std::string replacement;
  std::string description;
};

// Ordered, validated cleanup rules with their compiled patterns.
class CleanupRuleSet {
 public:
  /// Tab-separated "rule_id pattern replacement description" lines, '#'
  /// comments. Error(ConfigError) for bad patterns, duplicate ids, or
  /// replacements containing control characters.
  static CleanupRuleSet parse(std::string_view text);
  static CleanupRuleSet load(const std::string& path);
  static CleanupRuleSet from_rules(std::vector<CleanupRule> rules);
  static const CleanupRuleSet& builtin();

  const std::vector<CleanupRule>& rules() const { return rules_; }
  const std::vector<std::regex>& compiled() const { return compiled_; }
  const std::string& version() const { return version_; }

 private:
  std::vector<CleanupRule> rules_;
  std::vector<std::regex> compiled_;
  std::string version_;
};

inline constexpr int kMaxNormalizePasses = 5;
inline constexpr std::string_view kCapitalizeRule = "builtin.capitalize";
inline constexpr std::string_view kTerminalRule = "builtin.terminal_punctuation";

struct NormalizeResult {
  std::string text;
  std::vector<CleanupEdit> edits;
};

/// Applies every rule once in order, then the capitalization and terminal
/// punctuation steps; repeats whole passes until nothing changes.
/// Error(NonConvergent) if the text still changes on pass kMaxNormalizePasses.
NormalizeResult normalize(std::string_view text, const CleanupRuleSet& rules = CleanupRuleSet::builtin());

struct VerifierContext {
  const RoomLexicon* lexicon = &RoomLexicon::builtin();
  const ActionSynonyms* actions = &ActionSynonyms::builtin();
  const TemplateSet* templates = &TemplateSet::builtin();
  const CleanupRuleSet* rules = &CleanupRuleSet::builtin();
  const ImageSource* images = nullptr;
};

/// Pairs every non-Stop action mention with the nearest preceding room
/// mention (same sentence first, else the latest earlier room), in textual
/// order. Error(EmptyInstruction) for blank input, Error(ExtractionFailure)
/// when no pair is found.
std::vector<NodeActionPair> extract_pairs_rule_based(std::string_view instruction_text,
                                                     const VerifierContext& ctx = {});

/// Parses "(<room>, <action>)" lines. Rooms outside the lexicon become
/// kUnknownRoom; lines with an unknown action or Stop are skipped.
std::vector<NodeActionPair> parse_extraction_answer(std::string_view answer, const VerifierContext& ctx = {});

/// Dispatches on `strategy`; the LMM route sends build_extraction_prompt
/// through `gateway` (required for that route).
std::vector<NodeActionPair> extract_pairs(std::string_view instruction_text, ExtractorKind strategy,
                                          Gateway* gateway, const VerifierContext& ctx = {});

/// The room type of the last room mention in the text.
std::optional<std::string> last_room_mention(std::string_view text, const RoomLexicon& lexicon);

/// (room_type, action) per room node, in order. The terminal (room, Stop)
/// pair is omitted unless include_terminal. Error(PreconditionViolated) if
/// the trajectory is not grounded.
std::vector<NodeActionPair> ground_truth_pairs(const Trajectory& traj, bool include_terminal = false);

/// Room placeholder used as `expected` for extracted pairs beyond the end of
/// the ground truth.
inline constexpr std::string_view kNoExpectedPair = "<none>";

/// Pass iff equal length and element-wise equal (room type and action).
/// Otherwise Mismatch with one entry per differing index.
Verdict check_consistency(const std::vector<NodeActionPair>& extracted, const std::vector<NodeActionPair>& truth);

enum class LabelMatch { RoomTypeOnly };

struct VerifyConfig {
  int max_attempts = 3;
  std::vector<ExtractorKind> extractor_order = {ExtractorKind::LMM, ExtractorKind::RuleBased};
  LabelMatch label_match = LabelMatch::RoomTypeOnly;
  // Also require the last room mentioned to be the trajectory's final room.
  bool check_destination = true;

  void validate() const;
};

/// Extraction + consistency for one instruction text (already normalized).
/// No regeneration. Errors: PipelineError if every extractor needs the
/// gateway and it fails.
VerificationRecord verify_instruction(const Trajectory& traj, std::string_view instruction_text, Gateway* gateway,
                                      const VerifyConfig& cfg = {}, const VerifierContext& ctx = {});

struct AttemptTrace {
  int attempt = 0;
  Completion completion;
  NormalizeResult normalized;
  VerificationRecord record;
};

/// Generate -> normalize -> extract -> check, regenerating up to
/// max_attempts times. Verified on the first Pass, otherwise Rejected with
/// the last record. Gateway failures surface as Error(PipelineError).
PathInstructionPair generate_verified(const Trajectory& traj, Granularity granularity, Gateway& gateway,
                                      const VerifyConfig& cfg = {}, const VerifierContext& ctx = {},
                                      std::vector<AttemptTrace>* trace = nullptr);

}  // namespace vlnpairs

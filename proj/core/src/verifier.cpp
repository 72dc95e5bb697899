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

#include "vlnpairs/verifier.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "embedded_data.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/grounding.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

// ---------------------------------------------------------------------------
// Cleanup rules

CleanupRuleSet CleanupRuleSet::from_rules(std::vector<CleanupRule> rules) {
  CleanupRuleSet set;
  std::set<std::string> ids;
  std::string blob;
  for (auto& r : rules) {
    if (r.rule_id.empty() || r.pattern.empty()) {
      throw Error(ErrorCode::ConfigError, "cleanup rule needs an id and a pattern");
    }
    if (!ids.insert(r.rule_id).second) throw Error(ErrorCode::ConfigError, "duplicate cleanup rule " + r.rule_id);
    for (unsigned char c : r.replacement) {
      if (c < 0x20 || c == 0x7f) {
        throw Error(ErrorCode::ConfigError, "cleanup rule " + r.rule_id + " replacement has a control character");
      }
    }
    try {
      set.compiled_.emplace_back(r.pattern, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::ConfigError, "cleanup rule " + r.rule_id + " has a bad pattern: " + e.what());
    }
    blob += r.rule_id + '\t' + r.pattern + '\t' + r.replacement + '\n';
  }
  set.rules_ = std::move(rules);
  set.version_ = sha256_hex(blob).substr(0, 16);
  return set;
}

CleanupRuleSet CleanupRuleSet::parse(std::string_view text) {
  std::vector<CleanupRule> rules;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t p = 0;
    while (true) {
      std::size_t tab = line.find('\t', p);
      fields.push_back(line.substr(p, tab == std::string::npos ? std::string::npos : tab - p));
      if (tab == std::string::npos) break;
      p = tab + 1;
    }
    if (fields.size() < 3 || fields.size() > 4) {
      throw Error(ErrorCode::ConfigError, "cleanup rules line " + std::to_string(line_no) +
                                              ": expected rule_id, pattern, replacement[, description]");
    }
    rules.push_back({fields[0], fields[1], fields[2], fields.size() == 4 ? fields[3] : ""});
  }
  return from_rules(std::move(rules));
}

CleanupRuleSet CleanupRuleSet::load(const std::string& path) { return parse(read_file(path)); }

const CleanupRuleSet& CleanupRuleSet::builtin() {
  static const CleanupRuleSet set = parse(embedded::cleanup_rules());
  return set;
}

namespace {

std::string apply_rule(const std::string& text, const std::regex& re, const CleanupRule& rule,
                       std::vector<CleanupEdit>& edits) {
  std::string out;
  auto last = text.cbegin();
  for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it) {
    const auto& m = *it;
    if (m.length(0) == 0) continue;
    out.append(last, m[0].first);
    std::string replacement = m.format(rule.replacement);
    if (replacement != m.str()) edits.push_back({rule.rule_id, m.str(), replacement});
    out += replacement;
    last = m[0].second;
  }
  out.append(last, text.cend());
  return out;
}

void finish_sentence(std::string& text, std::vector<CleanupEdit>& edits) {
  if (text.empty()) return;
  if (std::islower(static_cast<unsigned char>(text.front()))) {
    std::string before(1, text.front());
    text.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(text.front())));
    edits.push_back({std::string(kCapitalizeRule), before, std::string(1, text.front())});
  }
  char last = text.back();
  if (last != '.' && last != '!' && last != '?') {
    text.push_back('.');
    edits.push_back({std::string(kTerminalRule), "", "."});
  }
}

}  // namespace

NormalizeResult normalize(std::string_view input, const CleanupRuleSet& rules) {
  NormalizeResult result{std::string(input), {}};
  for (int pass = 1; pass <= kMaxNormalizePasses; ++pass) {
    const std::string before = result.text;
    for (std::size_t i = 0; i < rules.rules().size(); ++i) {
      result.text = apply_rule(result.text, rules.compiled()[i], rules.rules()[i], result.edits);
    }
    finish_sentence(result.text, result.edits);
    if (result.text == before) return result;
  }
  throw Error(ErrorCode::NonConvergent,
              "cleanup rules did not reach a fixed point within " + std::to_string(kMaxNormalizePasses) + " passes");
}

// ---------------------------------------------------------------------------
// Extraction

std::vector<NodeActionPair> extract_pairs_rule_based(std::string_view text, const VerifierContext& ctx) {
  if (trim(text).empty()) throw Error(ErrorCode::EmptyInstruction, "instruction is empty");

  // Sentence number of every byte offset.
  std::vector<int> sentence_of(text.size() + 1, 0);
  int sentence = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    sentence_of[i] = sentence;
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || text[i + 1] == ' ')) ++sentence;
  }
  sentence_of[text.size()] = sentence;

  const auto rooms = ctx.lexicon->find_mentions(text);
  const auto actions = ctx.actions->find_mentions(text);

  std::vector<NodeActionPair> pairs;
  for (const auto& act : actions) {
    const Action a = *action_from_name(act.canonical);
    if (a == Action::Stop) continue;
    const Mention* same_sentence = nullptr;
    const Mention* earlier = nullptr;
    for (const auto& room : rooms) {
      if (room.begin >= act.begin) break;
      earlier = &room;
      if (sentence_of[room.begin] == sentence_of[act.begin]) same_sentence = &room;
    }
    const Mention* chosen = same_sentence ? same_sentence : earlier;
    if (chosen) pairs.push_back({chosen->canonical, a});
  }
  if (pairs.empty()) throw Error(ErrorCode::ExtractionFailure, "no (room, action) pair found");
  return pairs;
}

std::vector<NodeActionPair> parse_extraction_answer(std::string_view answer, const VerifierContext& ctx) {
  static const std::regex pair_re(R"(\(\s*([^,()]+?)\s*,\s*([^()]+?)\s*\))");
  std::vector<NodeActionPair> pairs;
  const std::string s(answer);
  for (std::sregex_iterator it(s.begin(), s.end(), pair_re), end; it != end; ++it) {
    auto action = ctx.actions->canonicalize((*it)[2].str());
    if (!action || *action == Action::Stop) continue;
    auto room = ctx.lexicon->canonicalize((*it)[1].str());
    pairs.push_back({room ? *room : std::string(kUnknownRoom), *action});
  }
  return pairs;
}

std::vector<NodeActionPair> extract_pairs(std::string_view instruction_text, ExtractorKind strategy,
                                          Gateway* gateway, const VerifierContext& ctx) {
  if (strategy == ExtractorKind::RuleBased) return extract_pairs_rule_based(instruction_text, ctx);
  if (!gateway) throw Error(ErrorCode::PreconditionViolated, "LMM extraction needs a gateway");
  Prompt prompt = build_extraction_prompt(instruction_text, *ctx.templates);
  Completion reply = gateway->complete(prompt);
  auto pairs = parse_extraction_answer(reply.text, ctx);
  if (pairs.empty()) throw Error(ErrorCode::ExtractionFailure, "extraction reply contained no pairs");
  return pairs;
}

std::optional<std::string> last_room_mention(std::string_view text, const RoomLexicon& lexicon) {
  auto mentions = lexicon.find_mentions(text);
  if (mentions.empty()) return std::nullopt;
  return mentions.back().canonical;
}

// ---------------------------------------------------------------------------
// Consistency

std::vector<NodeActionPair> ground_truth_pairs(const Trajectory& traj, bool include_terminal) {
  if (!traj.is_grounded()) {
    throw Error(ErrorCode::PreconditionViolated, "ground_truth_pairs: trajectory " + traj.id() + " is not grounded");
  }
  std::vector<NodeActionPair> pairs;
  for (const auto* node : traj.room_nodes()) pairs.push_back({node->label->room_type, *node->action});
  if (!include_terminal) pairs.pop_back();
  return pairs;
}

Verdict check_consistency(const std::vector<NodeActionPair>& extracted, const std::vector<NodeActionPair>& truth) {
  Verdict v;
  const std::size_t n = std::max(extracted.size(), truth.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<NodeActionPair> got;
    if (i < extracted.size()) got = extracted[i];
    NodeActionPair expected = i < truth.size() ? truth[i] : NodeActionPair{std::string(kNoExpectedPair), Action::Stop};
    if (i < truth.size() && got && *got == expected) continue;
    v.mismatches.push_back({static_cast<int>(i), std::move(expected), std::move(got)});
  }
  v.kind = v.mismatches.empty() ? Verdict::Kind::Pass : Verdict::Kind::Mismatch;
  return v;
}

void VerifyConfig::validate() const {
  if (max_attempts < 1) throw Error(ErrorCode::ConfigError, "verify max_attempts must be >= 1");
  if (extractor_order.empty()) throw Error(ErrorCode::ConfigError, "verify extractor_order must not be empty");
}

VerificationRecord verify_instruction(const Trajectory& traj, std::string_view text, Gateway* gateway,
                                      const VerifyConfig& cfg, const VerifierContext& ctx) {
  const auto truth = ground_truth_pairs(traj);
  VerificationRecord record;
  record.template_version = ctx.templates->generation_version();

  if (!validate_instruction_text(text).empty()) {
    record.verdict = Verdict::extraction_failure();
    return record;
  }

  bool extracted = false;
  for (std::size_t i = 0; i < cfg.extractor_order.size() && !extracted; ++i) {
    const ExtractorKind kind = cfg.extractor_order[i];
    const bool last_option = i + 1 == cfg.extractor_order.size();
    try {
      record.extracted = extract_pairs(text, kind, gateway, ctx);
      record.extractor = kind;
      extracted = true;
    } catch (const Error& e) {
      record.extractor = kind;
      if (e.code() == ErrorCode::ExtractionFailure || e.code() == ErrorCode::EmptyInstruction) continue;
      if (kind == ExtractorKind::LMM && last_option) {
        throw Error(ErrorCode::PipelineError, std::string("extraction: ") + e.what(), e.attempts());
      }
      if (kind != ExtractorKind::LMM) throw;
    }
  }
  if (!extracted) {
    record.verdict = Verdict::extraction_failure();
    return record;
  }

  record.verdict = check_consistency(record.extracted, truth);
  if (cfg.check_destination) {
    const std::string& final_room = traj.room_nodes().back()->label->room_type;
    auto destination = last_room_mention(text, *ctx.lexicon);
    if (destination != final_room) {
      std::optional<NodeActionPair> got;
      if (destination) got = NodeActionPair{*destination, Action::Stop};
      record.verdict.mismatches.push_back(
          {static_cast<int>(truth.size()), NodeActionPair{final_room, Action::Stop}, std::move(got)});
      record.verdict.kind = Verdict::Kind::Mismatch;
    }
  }
  return record;
}

PathInstructionPair generate_verified(const Trajectory& traj, Granularity granularity, Gateway& gateway,
                                      const VerifyConfig& cfg, const VerifierContext& ctx,
                                      std::vector<AttemptTrace>* trace) {
  cfg.validate();
  if (!traj.is_grounded()) {
    throw Error(ErrorCode::PreconditionViolated, "generate_verified: trajectory " + traj.id() + " is not grounded");
  }
  const Prompt prompt = build_generation_prompt(traj, granularity, *ctx.templates, ctx.images);

  std::optional<PathInstructionPair> last;
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    Completion completion;
    try {
      completion = gateway.complete(prompt, RequestOptions{attempt});
    } catch (const Error& e) {
      throw Error(ErrorCode::PipelineError,
                  "generation for " + traj.id() + " attempt " + std::to_string(attempt) + ": " + e.what(),
                  e.attempts());
    }
    NormalizeResult normalized = normalize(completion.text, *ctx.rules);
    VerificationRecord record = verify_instruction(traj, normalized.text, &gateway, cfg, ctx);
    record.attempts_used = attempt;
    record.template_version = prompt.template_version;

    Instruction instruction{normalized.text, granularity, completion.backend_id, attempt, normalized.edits};
    const bool pass = record.verdict.passed();
    if (trace) trace->push_back({attempt, completion, normalized, record});
    last = PathInstructionPair{traj, std::move(instruction), std::move(record),
                               pass ? PairStatus::Verified : PairStatus::Rejected};
    if (pass) break;
  }
  return std::move(*last);
}

}  // namespace vlnpairs

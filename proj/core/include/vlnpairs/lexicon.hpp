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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vlnpairs/types.hpp"

namespace vlnpairs {

// One parsed block of a lexicon file: a canonical term and its synonyms.
struct LexiconBlock {
  std::string canonical;
  std::vector<std::string> synonyms;
};

/// Parses the block format used by the lexicon files. Throws
/// Error(ConfigError) with a line number on malformed input or when a
/// surface form is claimed by two canonical terms.
std::vector<LexiconBlock> parse_lexicon_blocks(std::string_view text);

/// Lowercase, collapse whitespace, trim, and drop surrounding punctuation.
std::string normalize_phrase(std::string_view raw);

// A surface-form occurrence inside a longer text.
struct Mention {
  std::size_t begin = 0;  // byte offset into the scanned text
  std::size_t end = 0;
  std::string canonical;
};

// Maps surface forms to canonical room types.
class RoomLexicon {
 public:
  static RoomLexicon parse(std::string_view text);
  static RoomLexicon load(const std::string& path);
  /// The lexicon shipped with the library.
  static const RoomLexicon& builtin();

  /// Canonical room type, or nullopt for Unknown. Case-insensitive; a
  /// leading article is ignored.
  std::optional<std::string> canonicalize(std::string_view raw) const;

  bool contains(std::string_view canonical) const;
  const std::vector<std::string>& canonical_terms() const { return canonical_; }

  /// Non-overlapping, word-bounded, longest-first mentions in textual order.
  std::vector<Mention> find_mentions(std::string_view text) const;

  /// Content hash of the source text.
  const std::string& version() const { return version_; }

 private:
  std::vector<std::string> canonical_;
  std::map<std::string, std::string, std::less<>> forms_;
  // Surface forms sorted longest first.
  std::vector<std::pair<std::string, std::string>> by_length_;
  std::string version_;
};

// Maps action phrases to Action.
class ActionSynonyms {
 public:
  static ActionSynonyms parse(std::string_view text);
  static ActionSynonyms load(const std::string& path);
  static const ActionSynonyms& builtin();

  /// Longest word-bounded synonym contained in `raw`; nullopt for Unknown.
  std::optional<Action> canonicalize(std::string_view raw) const;

  /// Like RoomLexicon::find_mentions; Mention::canonical holds to_string(Action).
  std::vector<Mention> find_mentions(std::string_view text) const;

  const std::string& version() const { return version_; }

 private:
  std::map<std::string, Action, std::less<>> forms_;
  std::vector<std::pair<std::string, Action>> by_length_;
  std::string version_;
};

std::optional<std::string> canonicalize_room(std::string_view raw, const RoomLexicon& lexicon);
std::optional<Action> canonicalize_action(std::string_view raw, const ActionSynonyms& synonyms);

}  // namespace vlnpairs

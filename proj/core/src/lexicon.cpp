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

#include "vlnpairs/lexicon.hpp"

#include <algorithm>
#include <cctype>

#include "embedded_data.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {
namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

template <typename Value>
std::vector<Mention> scan(std::string_view text,
                          const std::vector<std::pair<std::string, Value>>& by_length,
                          auto&& canonical_name) {
  const std::string lower = to_lower(text);
  std::vector<Mention> out;
  std::size_t i = 0;
  while (i < lower.size()) {
    if (!is_word_char(lower[i]) || (i > 0 && is_word_char(lower[i - 1]))) {
      ++i;
      continue;
    }
    bool hit = false;
    for (const auto& [form, value] : by_length) {
      // Forms are stored single-spaced; allow runs of spaces in the text.
      std::size_t t = i, f = 0;
      while (f < form.size() && t < lower.size()) {
        if (form[f] == ' ') {
          if (lower[t] != ' ') break;
          while (t < lower.size() && lower[t] == ' ') ++t;
          ++f;
        } else if (form[f] == lower[t]) {
          ++f;
          ++t;
        } else {
          break;
        }
      }
      if (f == form.size() && (t == lower.size() || !is_word_char(lower[t]))) {
        out.push_back({i, t, canonical_name(value)});
        i = t;
        hit = true;
        break;
      }
    }
    if (!hit) {
      while (i < lower.size() && is_word_char(lower[i])) ++i;
    }
  }
  return out;
}

template <typename Value>
std::vector<std::pair<std::string, Value>> sort_by_length(const std::map<std::string, Value, std::less<>>& forms) {
  std::vector<std::pair<std::string, Value>> v(forms.begin(), forms.end());
  std::stable_sort(v.begin(), v.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  return v;
}

std::string strip_article(std::string s) {
  for (std::string_view article : {"the ", "a ", "an "}) {
    if (s.size() > article.size() && s.compare(0, article.size(), article) == 0) {
      return s.substr(article.size());
    }
  }
  return s;
}

}  // namespace

std::string normalize_phrase(std::string_view raw) {
  std::string s = collapse_spaces(to_lower(raw));
  auto is_edge_punct = [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) && c != '_' && c != '<' && c != '>';
  };
  std::size_t b = 0, e = s.size();
  while (b < e && is_edge_punct(s[b])) ++b;
  while (e > b && is_edge_punct(s[e - 1])) --e;
  return trim(std::string_view(s).substr(b, e - b));
}

std::vector<LexiconBlock> parse_lexicon_blocks(std::string_view text) {
  std::vector<LexiconBlock> blocks;
  std::map<std::string, std::string> owner;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto claim = [&](const std::string& form, const std::string& canonical) {
    auto [it, inserted] = owner.emplace(form, canonical);
    if (!inserted && it->second != canonical) {
      throw Error(ErrorCode::ConfigError, "lexicon line " + std::to_string(line_no) + ": '" + form +
                                              "' already belongs to '" + it->second + "'");
    }
  };
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::string content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const bool indented = line.front() == ' ' || line.front() == '\t';
    std::string form = collapse_spaces(to_lower(content));
    if (!indented) {
      blocks.push_back({content, {}});
      claim(form, content);
    } else {
      if (blocks.empty()) {
        throw Error(ErrorCode::ConfigError,
                    "lexicon line " + std::to_string(line_no) + ": synonym before any canonical term");
      }
      claim(form, blocks.back().canonical);
      blocks.back().synonyms.push_back(form);
    }
    if (nl == text.size()) break;
  }
  return blocks;
}

RoomLexicon RoomLexicon::parse(std::string_view text) {
  RoomLexicon lex;
  for (auto& block : parse_lexicon_blocks(text)) {
    std::string canonical = collapse_spaces(to_lower(block.canonical));
    lex.canonical_.push_back(canonical);
    lex.forms_[canonical] = canonical;
    for (auto& s : block.synonyms) lex.forms_[s] = canonical;
  }
  if (lex.canonical_.empty()) throw Error(ErrorCode::ConfigError, "room lexicon is empty");
  lex.by_length_ = sort_by_length(lex.forms_);
  lex.version_ = sha256_hex(text).substr(0, 16);
  return lex;
}

RoomLexicon RoomLexicon::load(const std::string& path) { return parse(read_file(path)); }

const RoomLexicon& RoomLexicon::builtin() {
  static const RoomLexicon lex = parse(embedded::rooms_lexicon());
  return lex;
}

std::optional<std::string> RoomLexicon::canonicalize(std::string_view raw) const {
  std::string key = strip_article(normalize_phrase(raw));
  if (auto it = forms_.find(key); it != forms_.end()) return it->second;
  return std::nullopt;
}

bool RoomLexicon::contains(std::string_view canonical) const {
  return std::find(canonical_.begin(), canonical_.end(), canonical) != canonical_.end();
}

std::vector<Mention> RoomLexicon::find_mentions(std::string_view text) const {
  return scan(text, by_length_, [](const std::string& c) { return c; });
}

ActionSynonyms ActionSynonyms::parse(std::string_view text) {
  ActionSynonyms syn;
  for (auto& block : parse_lexicon_blocks(text)) {
    auto action = action_from_name(block.canonical);
    if (!action) throw Error(ErrorCode::ConfigError, "unknown canonical action '" + block.canonical + "'");
    syn.forms_[to_lower(block.canonical)] = *action;
    for (auto& s : block.synonyms) syn.forms_[s] = *action;
  }
  syn.by_length_ = sort_by_length(syn.forms_);
  syn.version_ = sha256_hex(text).substr(0, 16);
  return syn;
}

ActionSynonyms ActionSynonyms::load(const std::string& path) { return parse(read_file(path)); }

const ActionSynonyms& ActionSynonyms::builtin() {
  static const ActionSynonyms syn = parse(embedded::action_synonyms());
  return syn;
}

std::optional<Action> ActionSynonyms::canonicalize(std::string_view raw) const {
  std::string key = normalize_phrase(raw);
  if (auto it = forms_.find(key); it != forms_.end()) return it->second;
  auto mentions = find_mentions(key);
  const Mention* best = nullptr;
  for (const auto& m : mentions) {
    if (!best || m.end - m.begin > best->end - best->begin) best = &m;
  }
  if (!best) return std::nullopt;
  return action_from_name(best->canonical);
}

std::vector<Mention> ActionSynonyms::find_mentions(std::string_view text) const {
  return scan(text, by_length_, [](Action a) { return std::string(to_string(a)); });
}

std::optional<std::string> canonicalize_room(std::string_view raw, const RoomLexicon& lexicon) {
  return lexicon.canonicalize(raw);
}

std::optional<Action> canonicalize_action(std::string_view raw, const ActionSynonyms& synonyms) {
  return synonyms.canonicalize(raw);
}

}  // namespace vlnpairs

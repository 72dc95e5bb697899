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

#include <bit>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "json_codec.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/pretext.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

using codec::json;
namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "feature encoding assumes a little-endian host");

constexpr const char* kExamplesFile = "pretext.jsonl";
constexpr const char* kManifestFile = "pretext_manifest.json";

std::string encode_floats(const std::vector<float>& values) {
  std::vector<std::uint8_t> bytes(values.size() * sizeof(float));
  if (!values.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  return base64_encode(std::span<const std::uint8_t>(bytes));
}

std::vector<float> decode_floats(const std::string& text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % sizeof(float) != 0) throw Error(ErrorCode::SchemaMismatch, "feature payload is not float32");
  std::vector<float> out(bytes.size() / sizeof(float));
  if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

// Region features are flattened in visual order; IMG markers carry none.
json encode_sequence(const MultimodalSequence& s) {
  std::vector<float> flat;
  json masked = json::array();
  for (std::size_t i = 0; i < s.visual_tokens.size(); ++i) {
    const auto& t = s.visual_tokens[i];
    flat.insert(flat.end(), t.features.begin(), t.features.end());
    if (t.masked) masked.push_back(i);
  }
  return {{"source_pair_id", s.source_pair_id},
          {"regions_per_node", s.regions_per_node},
          {"feature_dim", s.feature_dim},
          {"node_keys", s.node_keys},
          {"text_tokens", s.text_tokens},
          {"masked_regions", std::move(masked)},
          {"features", encode_floats(flat)}};
}

MultimodalSequence decode_sequence(const json& j) {
  MultimodalSequence s;
  s.source_pair_id = j.at("source_pair_id").get<std::string>();
  s.regions_per_node = j.at("regions_per_node").get<int>();
  s.feature_dim = j.at("feature_dim").get<int>();
  s.node_keys = j.at("node_keys").get<std::vector<std::string>>();
  s.text_tokens = j.at("text_tokens").get<std::vector<std::string>>();
  const auto flat = decode_floats(j.at("features").get<std::string>());
  const auto n = static_cast<std::size_t>(s.regions_per_node);
  const auto d = static_cast<std::size_t>(s.feature_dim);
  if (flat.size() != s.node_keys.size() * n * d) throw Error(ErrorCode::SchemaMismatch, "feature payload size");
  std::size_t offset = 0;
  for (std::size_t node = 0; node < s.node_keys.size(); ++node) {
    s.visual_tokens.push_back({VisualToken::Kind::Img, static_cast<int>(node), -1, false, {}});
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<float> f(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                           flat.begin() + static_cast<std::ptrdiff_t>(offset + d));
      offset += d;
      s.visual_tokens.push_back(
          {VisualToken::Kind::Region, static_cast<int>(node), static_cast<int>(r), false, std::move(f)});
    }
  }
  for (const auto& m : j.at("masked_regions")) {
    const auto i = m.get<std::size_t>();
    if (i >= s.visual_tokens.size()) throw Error(ErrorCode::SchemaMismatch, "masked region out of range");
    s.visual_tokens[i].masked = true;
  }
  return s;
}

json encode_example(const PretextExample& ex) {
  json j{{"variant", ex.variant_name()}, {"source_pair_id", ex.source_pair_id}, {"seed", ex.seed}};
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, MlmExample>) {
          j["sequence"] = encode_sequence(d.sequence);
          j["positions"] = d.positions;
          j["originals"] = d.originals;
        } else if constexpr (std::is_same_v<T, MvmExample>) {
          j["sequence"] = encode_sequence(d.sequence);
          j["positions"] = d.positions;
          json originals = json::array();
          for (const auto& o : d.originals) originals.push_back(encode_floats(o));
          j["originals"] = std::move(originals);
        } else if constexpr (std::is_same_v<T, PijExample>) {
          j["sequence"] = encode_sequence(d.sequence);
          j["is_paired"] = d.is_paired;
        } else {
          json candidates = json::array();
          for (const auto& c : d.candidates) candidates.push_back(encode_sequence(c));
          j["candidates"] = std::move(candidates);
          j["gold_index"] = d.gold_index;
          j["distractor_kinds"] = d.distractor_kinds;
        }
      },
      ex.data);
  return j;
}

PretextExample decode_example(const json& j) {
  PretextExample ex;
  ex.source_pair_id = j.at("source_pair_id").get<std::string>();
  ex.seed = j.at("seed").get<std::uint64_t>();
  const auto variant = j.at("variant").get<std::string>();
  if (variant == "MLM") {
    ex.data = MlmExample{decode_sequence(j.at("sequence")), j.at("positions").get<std::vector<int>>(),
                         j.at("originals").get<std::vector<std::string>>()};
  } else if (variant == "MVM") {
    MvmExample m{decode_sequence(j.at("sequence")), j.at("positions").get<std::vector<int>>(), {}};
    for (const auto& o : j.at("originals")) m.originals.push_back(decode_floats(o.get<std::string>()));
    ex.data = std::move(m);
  } else if (variant == "PIJ") {
    ex.data = PijExample{decode_sequence(j.at("sequence")), j.at("is_paired").get<bool>()};
  } else if (variant == "PR") {
    PrExample p;
    for (const auto& c : j.at("candidates")) p.candidates.push_back(decode_sequence(c));
    p.gold_index = j.at("gold_index").get<int>();
    p.distractor_kinds = j.at("distractor_kinds").get<std::vector<std::string>>();
    ex.data = std::move(p);
  } else {
    throw Error(ErrorCode::SchemaMismatch, "unknown variant '" + variant + "'");
  }
  return ex;
}

json encode_config(const PretextConfig& c) {
  return {{"regions_per_node", c.regions_per_node},
          {"feature_dim", c.feature_dim},
          {"mask_prob", c.mask_prob},
          {"pr_candidates", c.pr_candidates},
          {"seed", c.seed}};
}

}  // namespace

std::string pretext_config_hash(const PretextConfig& config) {
  return sha256_hex(encode_config(config).dump()).substr(0, 16);
}

PretextManifest write_pretext_dataset(const std::vector<PretextExample>& examples, const std::string& directory,
                                      const PretextConfig& config, const PretextBuildStats& stats) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create directory " + directory + ": " + ec.message());

  PretextManifest m;
  m.seed = config.seed;
  m.config_hash = pretext_config_hash(config);
  m.skipped_pr = stats.skipped_pr;
  m.skipped_pij = stats.skipped_pij;
  std::string lines;
  for (const auto& ex : examples) {
    ++m.counts[std::string(ex.variant_name())];
    json j{{"schema_version", m.schema_version}};
    j.update(encode_example(ex));
    lines += j.dump();
    lines += '\n';
  }
  const json manifest{{"schema_version", m.schema_version}, {"counts", m.counts},
                      {"seed", m.seed},                     {"config_hash", m.config_hash},
                      {"config", encode_config(config)},     {"skipped", {{"PR", m.skipped_pr}, {"PIJ", m.skipped_pij}}}};
  write_file((fs::path(directory) / kExamplesFile).string(), lines);
  write_file((fs::path(directory) / kManifestFile).string(), manifest.dump(2) + "\n");
  return m;
}

std::vector<PretextExample> read_pretext_dataset(const std::string& directory, PretextManifest* manifest) {
  PretextManifest m;
  try {
    const auto j = json::parse(read_file((fs::path(directory) / kManifestFile).string()));
    m.schema_version = j.at("schema_version").get<int>();
    m.counts = j.at("counts").get<std::map<std::string, int>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.skipped_pr = j.at("skipped").at("PR").get<int>();
    m.skipped_pij = j.at("skipped").at("PIJ").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string(kManifestFile) + ": " + e.what());
  }
  if (m.schema_version != PretextManifest{}.schema_version) {
    throw Error(ErrorCode::SchemaMismatch, std::string(kManifestFile) + ": schema_version drift");
  }

  std::vector<PretextExample> out;
  std::map<std::string, int> counts;
  std::istringstream in(read_file((fs::path(directory) / kExamplesFile).string()));
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const std::string where = std::string(kExamplesFile) + " line " + std::to_string(n);
    try {
      const auto j = json::parse(line);
      if (j.at("schema_version").get<int>() != m.schema_version) {
        throw Error(ErrorCode::SchemaMismatch, "schema_version drift");
      }
      out.push_back(decode_example(j));
      ++counts[std::string(out.back().variant_name())];
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaMismatch, where + ": " + e.detail());
    }
  }
  if (counts != m.counts) throw Error(ErrorCode::SchemaMismatch, "pretext manifest counts disagree with records");
  if (manifest) *manifest = m;
  return out;
}

}  // namespace vlnpairs

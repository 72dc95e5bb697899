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

#include "vlnpairs/dataset_io.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <set>
#include <sstream>

#include "json_codec.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

using codec::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kPairsFile = "pairs.jsonl";
constexpr const char* kQuarantineFile = "quarantine.jsonl";
constexpr const char* kManifestFile = "manifest.json";

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create directory " + dir + ": " + ec.message());
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) ensure_directory(parent.string());
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::SchemaMismatch, where + ": " + what);
}

}  // namespace

std::string creation_timestamp() {
  std::time_t t;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

DatasetManifest stats(const std::vector<PathInstructionPair>& pairs, const DatasetSplit& split) {
  DatasetManifest m;
  m.total_pairs = static_cast<int>(pairs.size());
  std::set<std::string> train(split.train_videos.begin(), split.train_videos.end());
  std::set<std::string> val(split.val_videos.begin(), split.val_videos.end());
  std::set<std::string> other;
  std::set<std::string> versions;
  int verified = 0;
  for (const auto& p : pairs) {
    ++m.by_status[std::string(to_string(p.status))];
    ++m.by_granularity[std::string(to_string(p.instruction.granularity))];
    ++m.attempts_histogram[p.verification.attempts_used];
    if (!p.verification.template_version.empty()) versions.insert(p.verification.template_version);
    if (p.status == PairStatus::Verified) ++verified;
    const auto& v = p.trajectory.video_id();
    if (!train.count(v) && !val.count(v)) other.insert(v);
  }
  m.train_videos = static_cast<int>(train.size());
  m.val_videos = static_cast<int>(val.size());
  m.other_videos = static_cast<int>(other.size());
  m.pass_rate = pairs.empty() ? 0.0 : static_cast<double>(verified) / static_cast<double>(pairs.size());
  m.template_versions.assign(versions.begin(), versions.end());
  m.created_at = creation_timestamp();
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json hist = json::object();
  for (const auto& [k, v] : m.attempts_histogram) hist[std::to_string(k)] = v;
  json j{{"schema_version", m.schema_version},
         {"videos", {{"train", m.train_videos}, {"val", m.val_videos}, {"other", m.other_videos}}},
         {"total_pairs", m.total_pairs},
         {"by_status", m.by_status},
         {"by_granularity", m.by_granularity},
         {"pass_rate", m.pass_rate},
         {"attempts_histogram", hist},
         {"template_versions", m.template_versions},
         {"created_at", m.created_at}};
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    DatasetManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kDatasetSchemaVersion) {
      schema_error("manifest", "schema_version " + std::to_string(m.schema_version) + ", expected " +
                                   std::to_string(kDatasetSchemaVersion));
    }
    m.train_videos = j.at("videos").at("train").get<int>();
    m.val_videos = j.at("videos").at("val").get<int>();
    m.other_videos = j.at("videos").at("other").get<int>();
    m.total_pairs = j.at("total_pairs").get<int>();
    m.by_status = j.at("by_status").get<std::map<std::string, int>>();
    m.by_granularity = j.at("by_granularity").get<std::map<std::string, int>>();
    m.pass_rate = j.at("pass_rate").get<double>();
    for (const auto& [k, v] : j.at("attempts_histogram").items()) m.attempts_histogram[std::stoi(k)] = v.get<int>();
    m.template_versions = j.at("template_versions").get<std::vector<std::string>>();
    m.created_at = j.at("created_at").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    schema_error("manifest", e.what());
  }
}

DatasetManifest write_dataset(const std::vector<PathInstructionPair>& pairs, const std::string& directory,
                              const DatasetSplit& split) {
  ensure_directory(directory);
  std::string verified;
  std::string rejected;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    json j{{"schema_version", kDatasetSchemaVersion}, {"seq", i}};
    j.update(codec::encode(pairs[i]));
    auto& out = pairs[i].status == PairStatus::Verified ? verified : rejected;
    out += j.dump();
    out += '\n';
  }
  const auto manifest = stats(pairs, split);
  write_file((fs::path(directory) / kPairsFile).string(), verified);
  write_file((fs::path(directory) / kQuarantineFile).string(), rejected);
  write_file((fs::path(directory) / kManifestFile).string(), manifest_to_json(manifest));
  return manifest;
}

std::vector<PathInstructionPair> read_dataset(const std::string& directory, DatasetManifest* manifest_out) {
  std::vector<std::pair<std::size_t, PathInstructionPair>> records;
  std::set<std::size_t> seen;
  for (const char* name : {kPairsFile, kQuarantineFile}) {
    const auto path = (fs::path(directory) / name).string();
    const auto lines = split_lines(read_file(path));
    for (std::size_t n = 0; n < lines.size(); ++n) {
      if (lines[n].empty()) continue;
      const std::string where = std::string(name) + " line " + std::to_string(n + 1);
      try {
        const auto j = json::parse(lines[n]);
        const int version = j.at("schema_version").get<int>();
        if (version != kDatasetSchemaVersion) {
          schema_error(where, "schema_version " + std::to_string(version) + ", expected " +
                                  std::to_string(kDatasetSchemaVersion));
        }
        const auto seq = j.at("seq").get<std::size_t>();
        if (!seen.insert(seq).second) schema_error(where, "duplicate seq " + std::to_string(seq));
        auto pair = codec::decode_pair(j);
        const bool want_verified = std::string(name) == kPairsFile;
        if ((pair.status == PairStatus::Verified) != want_verified) schema_error(where, "status does not match file");
        records.emplace_back(seq, std::move(pair));
      } catch (const json::exception& e) {
        schema_error(where, e.what());
      } catch (const Error& e) {
        if (e.code() == ErrorCode::SchemaMismatch && e.detail().rfind(where, 0) == 0) throw;
        schema_error(where, e.detail());
      }
    }
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<PathInstructionPair> pairs;
  pairs.reserve(records.size());
  for (auto& r : records) pairs.push_back(std::move(r.second));

  const auto manifest = manifest_from_json(read_file((fs::path(directory) / kManifestFile).string()));
  const auto recomputed = stats(pairs);
  if (manifest.total_pairs != recomputed.total_pairs || manifest.by_status != recomputed.by_status ||
      manifest.by_granularity != recomputed.by_granularity || manifest.pass_rate != recomputed.pass_rate ||
      manifest.attempts_histogram != recomputed.attempts_histogram ||
      manifest.template_versions != recomputed.template_versions) {
    schema_error("manifest", "counts disagree with the record files");
  }
  if (manifest_out) *manifest_out = manifest;
  return pairs;
}

std::vector<R2rRecord> export_r2r_style(const std::vector<PathInstructionPair>& pairs, const std::string& path) {
  for (const auto& p : pairs) {
    if (p.status != PairStatus::Verified) {
      throw Error(ErrorCode::RejectedPairIncluded, "export_r2r_style: " + p.pair_id() + " is Rejected");
    }
  }
  std::vector<R2rRecord> records;
  json out = json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    R2rRecord r;
    r.path_id = static_cast<int>(i);
    r.scan = p.trajectory.video_id();
    r.trajectory_id = p.trajectory.id();
    json frames = json::array();
    for (const auto* node : p.trajectory.room_nodes()) {
      r.path.push_back(node->frame.key());
      r.frames.push_back(node->frame);
      frames.push_back(codec::encode(node->frame));
    }
    r.instructions = {p.instruction.text};
    r.granularity = std::string(to_string(p.instruction.granularity));
    out.push_back({{"path_id", r.path_id},
                   {"scan", r.scan},
                   {"trajectory_id", r.trajectory_id},
                   {"path", r.path},
                   {"frames", std::move(frames)},
                   {"heading", r.heading},
                   {"instructions", r.instructions},
                   {"granularity", r.granularity}});
    records.push_back(std::move(r));
  }
  ensure_parent(path);
  write_file(path, out.dump(2) + "\n");
  return records;
}

std::vector<R2rRecord> read_r2r_export(const std::string& path) {
  std::vector<R2rRecord> records;
  try {
    for (const auto& j : json::parse(read_file(path))) {
      R2rRecord r;
      r.path_id = j.at("path_id").get<int>();
      r.scan = j.at("scan").get<std::string>();
      r.trajectory_id = j.at("trajectory_id").get<std::string>();
      r.path = j.at("path").get<std::vector<std::string>>();
      for (const auto& f : j.at("frames")) r.frames.push_back(codec::decode_frame(f));
      r.heading = j.at("heading").get<double>();
      r.instructions = j.at("instructions").get<std::vector<std::string>>();
      r.granularity = j.at("granularity").get<std::string>();
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    schema_error(path, e.what());
  }
  return records;
}

void write_trajectories(const std::vector<Trajectory>& trajectories, const std::string& path) {
  std::string out;
  for (const auto& t : trajectories) {
    json j{{"schema_version", kDatasetSchemaVersion}};
    j.update(codec::encode(t));
    out += j.dump();
    out += '\n';
  }
  ensure_parent(path);
  write_file(path, out);
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
  std::vector<Trajectory> out;
  const auto lines = split_lines(read_file(path));
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = path + " line " + std::to_string(n + 1);
    try {
      const auto j = json::parse(lines[n]);
      if (j.at("schema_version").get<int>() != kDatasetSchemaVersion) schema_error(where, "schema_version drift");
      out.push_back(codec::decode_trajectory(j));
    } catch (const json::exception& e) {
      schema_error(where, e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SchemaMismatch && e.detail().rfind(where, 0) == 0) throw;
      schema_error(where, e.detail());
    }
  }
  return out;
}

std::string pair_to_json(const PathInstructionPair& pair) { return codec::encode(pair).dump(); }

PathInstructionPair pair_from_json(const std::string& text) {
  try {
    return codec::decode_pair(json::parse(text));
  } catch (const json::exception& e) {
    schema_error("pair", e.what());
  }
}

std::string trajectory_to_json(const Trajectory& trajectory) { return codec::encode(trajectory).dump(); }

Trajectory trajectory_from_json(const std::string& text) {
  try {
    return codec::decode_trajectory(json::parse(text));
  } catch (const json::exception& e) {
    schema_error("trajectory", e.what());
  }
}

}  // namespace vlnpairs

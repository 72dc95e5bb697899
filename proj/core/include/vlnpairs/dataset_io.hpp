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
#include <string>
#include <vector>

#include "vlnpairs/types.hpp"

namespace vlnpairs {

inline constexpr int kDatasetSchemaVersion = 1;

// Dataset directory layout:
//   pairs.jsonl       Verified pairs, one JSON object per line
//   quarantine.jsonl  Rejected pairs
//   manifest.json     DatasetManifest
// Every record carries "schema_version" and "seq" (its position in the
// original list) so read_dataset restores the written order.

struct DatasetSplit {
  std::vector<std::string> train_videos;
  std::vector<std::string> val_videos;
};

struct DatasetManifest {
  int schema_version = kDatasetSchemaVersion;
  int train_videos = 0;
  int val_videos = 0;
  int other_videos = 0;  // present in the pairs but in neither split list
  int total_pairs = 0;
  std::map<std::string, int> by_status;       // "Verified", "Rejected"
  std::map<std::string, int> by_granularity;  // "coarse", "fine"
  double pass_rate = 0.0;                     // Verified / total, 0 when empty
  std::map<int, int> attempts_histogram;      // attempts_used -> pair count
  std::vector<std::string> template_versions;  // sorted, distinct
  std::string created_at;                      // UTC ISO-8601

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Recomputes every count from `pairs`. Videos with no pair still count
/// toward the split sizes.
DatasetManifest stats(const std::vector<PathInstructionPair>& pairs, const DatasetSplit& split = {});

/// UTC timestamp from SOURCE_DATE_EPOCH when set, otherwise the clock.
std::string creation_timestamp();

/// Errors: IoError.
DatasetManifest write_dataset(const std::vector<PathInstructionPair>& pairs, const std::string& directory,
                              const DatasetSplit& split = {});

/// Errors: IoError, SchemaMismatch (naming file and line) on version drift,
/// malformed records, or a manifest whose counts disagree with the records.
std::vector<PathInstructionPair> read_dataset(const std::string& directory, DatasetManifest* manifest = nullptr);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

// R2R-style export: a JSON array of
//   {"path_id", "scan", "trajectory_id", "path": [frame keys of room nodes],
//    "frames": [{video_id, frame_index, timestamp_s}], "heading": 0.0,
//    "instructions": [text], "granularity"}
struct R2rRecord {
  int path_id = 0;
  std::string scan;
  std::string trajectory_id;
  std::vector<std::string> path;
  std::vector<FrameRef> frames;
  double heading = 0.0;
  std::vector<std::string> instructions;
  std::string granularity;

  friend bool operator==(const R2rRecord&, const R2rRecord&) = default;
};

/// Errors: RejectedPairIncluded (nothing written), IoError.
std::vector<R2rRecord> export_r2r_style(const std::vector<PathInstructionPair>& pairs, const std::string& path);
std::vector<R2rRecord> read_r2r_export(const std::string& path);

/// JSON-lines file of trajectories (sampler and grounding stage output).
void write_trajectories(const std::vector<Trajectory>& trajectories, const std::string& path);
std::vector<Trajectory> read_trajectories(const std::string& path);

/// Single-record helpers, one JSON object without trailing newline.
std::string pair_to_json(const PathInstructionPair& pair);
PathInstructionPair pair_from_json(const std::string& text);
std::string trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const std::string& text);

}  // namespace vlnpairs

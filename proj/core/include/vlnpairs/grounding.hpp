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

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vlnpairs/lexicon.hpp"
#include "vlnpairs/types.hpp"

namespace vlnpairs {

class ImageSource;

// Node labeler (room type + key objects for one frame).
class LabelClient {
 public:
  virtual ~LabelClient() = default;
  /// Throws Error(LabelerUnavailable) once retries are spent.
  virtual RoomLabel label(const FrameRef& frame) = 0;
};

// Inverse action model between two room-node frames. Never returns Stop.
class ActionClient {
 public:
  virtual ~ActionClient() = default;
  /// Throws Error(ActionClientUnavailable) once retries are spent.
  virtual Action infer(const FrameRef& from, const FrameRef& to) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  double backoff_multiplier = 2.0;
};

// Deterministic labeler keyed by FrameRef::key(). Keys missing from the
// table get a label derived from a hash of the key and `seed`.
class StubLabelClient : public LabelClient {
 public:
  explicit StubLabelClient(std::map<std::string, RoomLabel> table = {}, std::uint64_t seed = 0,
                           const RoomLexicon& lexicon = RoomLexicon::builtin());

  /// Table file: one "frame_key<TAB>room_type<TAB>obj1,obj2<TAB>confidence"
  /// record per line; '#' starts a comment.
  static std::map<std::string, RoomLabel> parse_table(std::string_view text, const RoomLexicon& lexicon);
  static StubLabelClient from_file(const std::string& path, std::uint64_t seed = 0,
                                   const RoomLexicon& lexicon = RoomLexicon::builtin());

  RoomLabel label(const FrameRef& frame) override;

 private:
  std::map<std::string, RoomLabel> table_;
  std::uint64_t seed_;
  std::vector<std::string> rooms_;
};

// Deterministic action model keyed by the ordered key pair. Both directions
// of a pair are independent script entries.
class StubActionClient : public ActionClient {
 public:
  using Script = std::map<std::pair<std::string, std::string>, Action>;

  explicit StubActionClient(Script script = {}, std::uint64_t seed = 0);

  /// "key_a<TAB>key_b<TAB>forward|turn_left|turn_right" per line.
  static Script parse_script(std::string_view text);
  static StubActionClient from_file(const std::string& path, std::uint64_t seed = 0);

  Action infer(const FrameRef& from, const FrameRef& to) override;

 private:
  Script script_;
  std::uint64_t seed_;
};

// Memoizes another labeler by frame key; safe for concurrent callers.
class CachingLabelClient : public LabelClient {
 public:
  explicit CachingLabelClient(LabelClient& inner) : inner_(inner) {}

  RoomLabel label(const FrameRef& frame) override;
  std::size_t misses() const;

 private:
  LabelClient& inner_;
  mutable std::mutex mu_;
  std::map<std::string, RoomLabel> cache_;
  std::size_t misses_ = 0;
};

struct AdapterHealth {
  std::string status;
  std::string backend_id;
  std::string lexicon_version;
  bool ready = false;
};

// Client for the labeling/action adapter service (HTTP + JSON):
//   POST /label   {"image": b64, "frame_key": k}         -> LabelResponse
//   POST /action  {"image_a", "image_b", "key_a", "key_b"} -> ActionResponse
//   GET  /health                                          -> {status, backend_id, lexicon_version}
// 5xx and transport failures are retried per RetryPolicy; 4xx is not.
class AdapterClient : public LabelClient, public ActionClient {
 public:
  AdapterClient(std::string base_url, ImageSource& images, RetryPolicy retry = {},
                const RoomLexicon& lexicon = RoomLexicon::builtin(),
                std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~AdapterClient() override;

  RoomLabel label(const FrameRef& frame) override;
  Action infer(const FrameRef& from, const FrameRef& to) override;
  AdapterHealth health();

  /// Request bodies exactly as sent on the wire (exposed for conformance tests).
  static std::string label_request_body(std::string_view image_bytes, const std::string& frame_key);
  static std::string action_request_body(std::string_view image_a, std::string_view image_b,
                                         const std::string& key_a, const std::string& key_b);
  /// Parse and validate response bodies; throw Error(LabelerUnavailable /
  /// ActionClientUnavailable) on schema violations.
  static RoomLabel parse_label_response(std::string_view body, const RoomLexicon& lexicon);
  static Action parse_action_response(std::string_view body);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct GroundingOptions {
  int max_inflight = 4;
  TrajectoryLimits limits;
};

/// Labels every room node (transitions untouched). The trajectory must be
/// structurally valid and unlabeled, else Error(PreconditionViolated).
Trajectory label_nodes(const Trajectory& traj, LabelClient& client, const GroundingOptions& options = {});

/// Sets each room node's action from the client, in node order, using the
/// frames of consecutive room nodes; the final room node gets Stop without a
/// client call. Requires a labeled trajectory without actions.
Trajectory ground_actions(const Trajectory& traj, ActionClient& client, const GroundingOptions& options = {});

struct Triplet {
  FrameRef frame;
  std::optional<RoomLabel> label;
  std::optional<Action> action;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// One triplet per node; transition nodes yield (frame, None, None).
/// Error(PreconditionViolated) if the trajectory is not grounded.
std::vector<Triplet> triplet_view(const Trajectory& traj);

/// Inverse of triplet_view.
Trajectory trajectory_from_triplets(std::string trajectory_id, std::string video_id, std::uint64_t seed,
                                    const std::vector<Triplet>& triplets, const TrajectoryLimits& limits = {});

}  // namespace vlnpairs

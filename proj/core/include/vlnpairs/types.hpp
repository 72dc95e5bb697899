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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlnpairs {

struct FrameRef {
  std::string video_id;
  std::uint32_t frame_index = 0;
  double timestamp_s = 0.0;

  /// Stable key "<video_id>/f<frame_index, zero-padded to 3>", used by the
  /// stub adapters, caches and feature providers.
  std::string key() const;

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

enum class Action { Forward, TurnLeft, TurnRight, Stop };

/// "Forward", "TurnLeft", "TurnRight", "Stop".
std::string_view to_string(Action a);
/// Inverse of to_string; exact match only.
std::optional<Action> action_from_name(std::string_view name);
/// Wire spelling used by the adapter service: "forward", "turn_left", ...
std::string_view to_wire(Action a);
std::optional<Action> action_from_wire(std::string_view name);

inline constexpr Action kMovingActions[] = {Action::Forward, Action::TurnLeft, Action::TurnRight};

struct RoomLabel {
  std::string room_type;
  std::vector<std::string> objects;
  double room_confidence = 1.0;

  friend bool operator==(const RoomLabel&, const RoomLabel&) = default;
};

/// Prompt-facing "Object with Room" form: "sofa, lamp with living room", or
/// just the room type when there are no objects.
std::string serialize_label(const RoomLabel& label);

enum class NodeKind { Room, Transition };

struct TrajectoryNode {
  NodeKind kind = NodeKind::Room;
  FrameRef frame;
  std::optional<RoomLabel> label;
  std::optional<Action> action;

  bool is_room() const { return kind == NodeKind::Room; }

  friend bool operator==(const TrajectoryNode&, const TrajectoryNode&) = default;
};

struct TrajectoryLimits {
  int min_rooms = 2;
  int max_rooms = 7;
};

// Ordered room/transition nodes sampled from one video. Only constructible
// through create(), which enforces the structural invariants; once built a
// Trajectory is an immutable value.
class Trajectory {
 public:
  /// Throws Error(InvalidTrajectory) naming the first violated invariant.
  static Trajectory create(std::string trajectory_id, std::string video_id,
                           std::vector<TrajectoryNode> nodes, std::uint64_t seed,
                           const TrajectoryLimits& limits = {});

  /// Empty string when `nodes` satisfies every invariant, otherwise a
  /// description of the first violation.
  static std::string validate(std::string_view video_id, const std::vector<TrajectoryNode>& nodes,
                              const TrajectoryLimits& limits = {});

  const std::string& id() const { return trajectory_id_; }
  const std::string& video_id() const { return video_id_; }
  const std::vector<TrajectoryNode>& nodes() const { return nodes_; }
  std::uint64_t seed() const { return seed_; }

  int room_count() const;
  std::vector<const TrajectoryNode*> room_nodes() const;

  /// Every room node carries a label.
  bool is_labeled() const;
  /// Labeled and every room node carries an action.
  bool is_grounded() const;

  /// Copy with replaced nodes, re-validated.
  Trajectory with_nodes(std::vector<TrajectoryNode> nodes,
                        const TrajectoryLimits& limits = {}) const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  Trajectory() = default;

  std::string trajectory_id_;
  std::string video_id_;
  std::vector<TrajectoryNode> nodes_;
  std::uint64_t seed_ = 0;
};

inline constexpr std::string_view kUnknownRoom = "<unknown>";

struct NodeActionPair {
  std::string room_type;
  Action action = Action::Forward;

  friend bool operator==(const NodeActionPair&, const NodeActionPair&) = default;
};

enum class Granularity { Coarse, Fine };

std::string_view to_string(Granularity g);
std::optional<Granularity> granularity_from_name(std::string_view name);

struct CleanupEdit {
  std::string rule_id;
  std::string before;
  std::string after;

  friend bool operator==(const CleanupEdit&, const CleanupEdit&) = default;
};

struct Instruction {
  std::string text;
  Granularity granularity = Granularity::Coarse;
  std::string model_id;
  int attempt = 1;
  std::vector<CleanupEdit> cleanup_edits;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Empty when `text` is a well-formed instruction (non-empty, no control
/// characters, terminal punctuation), otherwise the reason it is not.
std::string validate_instruction_text(std::string_view text);

struct MismatchEntry {
  int index = 0;
  NodeActionPair expected;
  std::optional<NodeActionPair> got;

  friend bool operator==(const MismatchEntry&, const MismatchEntry&) = default;
};

struct Verdict {
  enum class Kind { Pass, Mismatch, ExtractionFailure };

  Kind kind = Kind::Pass;
  std::vector<MismatchEntry> mismatches;

  static Verdict pass() { return {}; }
  static Verdict extraction_failure() { return {Kind::ExtractionFailure, {}}; }

  bool passed() const { return kind == Kind::Pass; }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

std::string_view to_string(Verdict::Kind k);

enum class ExtractorKind { LMM, RuleBased };

std::string_view to_string(ExtractorKind k);

struct VerificationRecord {
  std::vector<NodeActionPair> extracted;
  Verdict verdict;
  int attempts_used = 1;
  ExtractorKind extractor = ExtractorKind::RuleBased;
  // Content hash of the generation template set the instruction came from.
  std::string template_version;

  friend bool operator==(const VerificationRecord&, const VerificationRecord&) = default;
};

enum class PairStatus { Verified, Rejected };

std::string_view to_string(PairStatus s);

struct PathInstructionPair {
  Trajectory trajectory;
  Instruction instruction;
  VerificationRecord verification;
  PairStatus status = PairStatus::Rejected;

  /// "<trajectory_id>/<granularity>".
  std::string pair_id() const;

  friend bool operator==(const PathInstructionPair&, const PathInstructionPair&) = default;
};

}  // namespace vlnpairs

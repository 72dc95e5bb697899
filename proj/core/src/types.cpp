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

#include "vlnpairs/types.hpp"

#include <cstdio>
#include <set>

#include "vlnpairs/error.hpp"

namespace vlnpairs {

std::string FrameRef::key() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03u", static_cast<unsigned>(frame_index));
  return video_id + "/f" + buf;
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::Forward: return "Forward";
    case Action::TurnLeft: return "TurnLeft";
    case Action::TurnRight: return "TurnRight";
    case Action::Stop: return "Stop";
  }
  return "Forward";
}

std::optional<Action> action_from_name(std::string_view name) {
  for (Action a : {Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Stop}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

std::string_view to_wire(Action a) {
  switch (a) {
    case Action::Forward: return "forward";
    case Action::TurnLeft: return "turn_left";
    case Action::TurnRight: return "turn_right";
    case Action::Stop: return "stop";
  }
  return "forward";
}

std::optional<Action> action_from_wire(std::string_view name) {
  for (Action a : {Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Stop}) {
    if (to_wire(a) == name) return a;
  }
  return std::nullopt;
}

std::string serialize_label(const RoomLabel& label) {
  if (label.objects.empty()) return label.room_type;
  std::string out;
  for (std::size_t i = 0; i < label.objects.size(); ++i) {
    if (i) out += ", ";
    out += label.objects[i];
  }
  return out + " with " + label.room_type;
}

std::string Trajectory::validate(std::string_view video_id, const std::vector<TrajectoryNode>& nodes,
                                 const TrajectoryLimits& limits) {
  if (nodes.empty()) return "trajectory has no nodes";
  if (!nodes.front().is_room()) return "first node is not a room node";
  if (!nodes.back().is_room()) return "last node is not a room node";

  int rooms = 0;
  int labeled = 0;
  int with_action = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.frame.video_id != video_id) return "node " + std::to_string(i) + " belongs to another video";
    if (i > 0 && n.frame.frame_index <= nodes[i - 1].frame.frame_index) {
      return "frame_index not strictly increasing at node " + std::to_string(i);
    }
    if (n.is_room()) {
      ++rooms;
      if (n.label) ++labeled;
      if (n.action) ++with_action;
      if (n.label && n.label->objects.size() !=
                         std::set<std::string>(n.label->objects.begin(), n.label->objects.end()).size()) {
        return "duplicate objects in label of node " + std::to_string(i);
      }
    } else if (n.label || n.action) {
      return "transition node " + std::to_string(i) + " carries a label or action";
    }
  }
  if (rooms < limits.min_rooms || rooms > limits.max_rooms) {
    return "room count " + std::to_string(rooms) + " outside [" + std::to_string(limits.min_rooms) + ", " +
           std::to_string(limits.max_rooms) + "]";
  }
  if (labeled != 0 && labeled != rooms) return "room nodes partially labeled";
  if (with_action != 0 && with_action != rooms) return "room nodes partially grounded";
  if (with_action != 0 && labeled == 0) return "actions present on unlabeled trajectory";
  if (with_action != 0) {
    int seen = 0;
    for (const auto& n : nodes) {
      if (!n.is_room()) continue;
      ++seen;
      bool last = seen == rooms;
      if (last && *n.action != Action::Stop) return "final room node action is not Stop";
      if (!last && *n.action == Action::Stop) return "Stop on a non-final room node";
    }
  }
  return {};
}

Trajectory Trajectory::create(std::string trajectory_id, std::string video_id,
                              std::vector<TrajectoryNode> nodes, std::uint64_t seed,
                              const TrajectoryLimits& limits) {
  if (auto why = validate(video_id, nodes, limits); !why.empty()) {
    throw Error(ErrorCode::InvalidTrajectory, trajectory_id + ": " + why);
  }
  Trajectory t;
  t.trajectory_id_ = std::move(trajectory_id);
  t.video_id_ = std::move(video_id);
  t.nodes_ = std::move(nodes);
  t.seed_ = seed;
  return t;
}

int Trajectory::room_count() const {
  int k = 0;
  for (const auto& n : nodes_) k += n.is_room();
  return k;
}

std::vector<const TrajectoryNode*> Trajectory::room_nodes() const {
  std::vector<const TrajectoryNode*> out;
  for (const auto& n : nodes_) {
    if (n.is_room()) out.push_back(&n);
  }
  return out;
}

bool Trajectory::is_labeled() const {
  for (const auto& n : nodes_) {
    if (n.is_room() && !n.label) return false;
  }
  return true;
}

bool Trajectory::is_grounded() const {
  for (const auto& n : nodes_) {
    if (n.is_room() && (!n.label || !n.action)) return false;
  }
  return true;
}

Trajectory Trajectory::with_nodes(std::vector<TrajectoryNode> nodes, const TrajectoryLimits& limits) const {
  return create(trajectory_id_, video_id_, std::move(nodes), seed_, limits);
}

std::string_view to_string(Granularity g) { return g == Granularity::Coarse ? "coarse" : "fine"; }

std::optional<Granularity> granularity_from_name(std::string_view name) {
  if (name == "coarse") return Granularity::Coarse;
  if (name == "fine") return Granularity::Fine;
  return std::nullopt;
}

std::string validate_instruction_text(std::string_view text) {
  if (text.empty()) return "empty instruction";
  for (unsigned char c : text) {
    if (c < 0x20 || c == 0x7f) return "control character in instruction";
  }
  char last = text.back();
  if (last != '.' && last != '!' && last != '?') return "missing terminal punctuation";
  return {};
}

std::string_view to_string(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Pass: return "Pass";
    case Verdict::Kind::Mismatch: return "Mismatch";
    case Verdict::Kind::ExtractionFailure: return "ExtractionFailure";
  }
  return "Pass";
}

std::string_view to_string(ExtractorKind k) { return k == ExtractorKind::LMM ? "LMM" : "RuleBased"; }

std::string_view to_string(PairStatus s) { return s == PairStatus::Verified ? "Verified" : "Rejected"; }

std::string PathInstructionPair::pair_id() const {
  return trajectory.id() + "/" + std::string(to_string(instruction.granularity));
}

}  // namespace vlnpairs

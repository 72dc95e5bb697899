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

#include "vlnpairs/grounding.hpp"

#include <algorithm>
#include <future>
#include <sstream>

#include "vlnpairs/error.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

// Stub object vocabulary for hashed fallback labels. None of these collide
// with room or action surface forms.
static constexpr std::string_view kStubObjects[] = {
    "sofa", "lamp",  "table",   "chairs", "rug",    "painting", "plant",    "mirror",
    "desk", "shelf", "cabinet", "window", "clock",  "curtains", "armchair", "bench",
};

StubLabelClient::StubLabelClient(std::map<std::string, RoomLabel> table, std::uint64_t seed,
                                 const RoomLexicon& lexicon)
    : table_(std::move(table)), seed_(seed), rooms_(lexicon.canonical_terms()) {}

std::map<std::string, RoomLabel> StubLabelClient::parse_table(std::string_view text, const RoomLexicon& lexicon) {
  std::map<std::string, RoomLabel> table;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      std::size_t tab = line.find('\t', pos);
      fields.push_back(trim(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos)));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() != 4) {
      throw Error(ErrorCode::ConfigError, "stub label table line " + std::to_string(line_no) + ": expected 4 fields");
    }
    auto room = lexicon.canonicalize(fields[1]);
    if (!room) {
      throw Error(ErrorCode::ConfigError,
                  "stub label table line " + std::to_string(line_no) + ": unknown room '" + fields[1] + "'");
    }
    RoomLabel label{*room, {}, 0.0};
    std::istringstream objs(fields[2]);
    std::string obj;
    while (std::getline(objs, obj, ',')) {
      obj = trim(obj);
      if (!obj.empty() && std::find(label.objects.begin(), label.objects.end(), obj) == label.objects.end()) {
        label.objects.push_back(obj);
      }
    }
    try {
      label.room_confidence = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "stub label table line " + std::to_string(line_no) + ": bad confidence");
    }
    if (label.room_confidence < 0.0 || label.room_confidence > 1.0) {
      throw Error(ErrorCode::ConfigError,
                  "stub label table line " + std::to_string(line_no) + ": confidence outside [0, 1]");
    }
    table[fields[0]] = std::move(label);
  }
  return table;
}

StubLabelClient StubLabelClient::from_file(const std::string& path, std::uint64_t seed, const RoomLexicon& lexicon) {
  return StubLabelClient(parse_table(read_file(path), lexicon), seed, lexicon);
}

RoomLabel StubLabelClient::label(const FrameRef& frame) {
  const std::string key = frame.key();
  if (auto it = table_.find(key); it != table_.end()) return it->second;
  Rng rng(seed_, hash64(key));
  RoomLabel label;
  label.room_type = rooms_[rng.below(rooms_.size())];
  std::size_t n_obj = rng.below(3);
  while (label.objects.size() < n_obj) {
    std::string obj(kStubObjects[rng.below(std::size(kStubObjects))]);
    if (std::find(label.objects.begin(), label.objects.end(), obj) == label.objects.end()) {
      label.objects.push_back(std::move(obj));
    }
  }
  label.room_confidence = 0.5 + 0.5 * rng.unit();
  return label;
}

StubActionClient::StubActionClient(Script script, std::uint64_t seed) : script_(std::move(script)), seed_(seed) {}

StubActionClient::Script StubActionClient::parse_script(std::string_view text) {
  Script script;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    std::istringstream fields(content);
    std::string a, b, act;
    if (!(fields >> a >> b >> act)) {
      throw Error(ErrorCode::ConfigError, "action script line " + std::to_string(line_no) + ": expected 3 fields");
    }
    auto action = action_from_wire(act);
    if (!action || *action == Action::Stop) {
      throw Error(ErrorCode::ConfigError,
                  "action script line " + std::to_string(line_no) + ": invalid action '" + act + "'");
    }
    script[{a, b}] = *action;
  }
  return script;
}

StubActionClient StubActionClient::from_file(const std::string& path, std::uint64_t seed) {
  return StubActionClient(parse_script(read_file(path)), seed);
}

Action StubActionClient::infer(const FrameRef& from, const FrameRef& to) {
  if (auto it = script_.find({from.key(), to.key()}); it != script_.end()) return it->second;
  Rng rng(seed_, hash64(from.key() + "->" + to.key()));
  return kMovingActions[rng.below(3)];
}

RoomLabel CachingLabelClient::label(const FrameRef& frame) {
  const std::string key = frame.key();
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  RoomLabel label = inner_.label(frame);
  std::lock_guard lock(mu_);
  auto [it, inserted] = cache_.emplace(key, std::move(label));
  if (inserted) ++misses_;
  return it->second;
}

std::size_t CachingLabelClient::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

Trajectory label_nodes(const Trajectory& traj, LabelClient& client, const GroundingOptions& options) {
  for (const auto& n : traj.nodes()) {
    if (n.is_room() && (n.label || n.action)) {
      throw Error(ErrorCode::PreconditionViolated, "label_nodes: trajectory " + traj.id() + " already labeled");
    }
  }
  std::vector<TrajectoryNode> nodes = traj.nodes();
  std::vector<std::size_t> rooms;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_room()) rooms.push_back(i);
  }

  // Bounded fan-out: at most max_inflight outstanding client calls.
  const std::size_t window = static_cast<std::size_t>(std::max(1, options.max_inflight));
  for (std::size_t begin = 0; begin < rooms.size(); begin += window) {
    const std::size_t end = std::min(rooms.size(), begin + window);
    if (end - begin == 1) {
      nodes[rooms[begin]].label = client.label(nodes[rooms[begin]].frame);
      continue;
    }
    std::vector<std::future<RoomLabel>> pending;
    for (std::size_t r = begin; r < end; ++r) {
      const FrameRef frame = nodes[rooms[r]].frame;
      pending.push_back(std::async(std::launch::async, [&client, frame] { return client.label(frame); }));
    }
    for (std::size_t r = begin; r < end; ++r) nodes[rooms[r]].label = pending[r - begin].get();
  }
  return traj.with_nodes(std::move(nodes), options.limits);
}

Trajectory ground_actions(const Trajectory& traj, ActionClient& client, const GroundingOptions& options) {
  if (!traj.is_labeled()) {
    throw Error(ErrorCode::PreconditionViolated, "ground_actions: trajectory " + traj.id() + " is not labeled");
  }
  std::vector<TrajectoryNode> nodes = traj.nodes();
  std::vector<std::size_t> rooms;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_room()) continue;
    if (nodes[i].action) {
      throw Error(ErrorCode::PreconditionViolated, "ground_actions: trajectory " + traj.id() + " already grounded");
    }
    rooms.push_back(i);
  }
  for (std::size_t r = 0; r + 1 < rooms.size(); ++r) {
    Action a = client.infer(nodes[rooms[r]].frame, nodes[rooms[r + 1]].frame);
    if (a == Action::Stop) {
      throw Error(ErrorCode::ActionClientUnavailable, "action client returned Stop for an intermediate node");
    }
    nodes[rooms[r]].action = a;
  }
  nodes[rooms.back()].action = Action::Stop;
  return traj.with_nodes(std::move(nodes), options.limits);
}

std::vector<Triplet> triplet_view(const Trajectory& traj) {
  if (!traj.is_grounded()) {
    throw Error(ErrorCode::PreconditionViolated, "triplet_view: trajectory " + traj.id() + " is not grounded");
  }
  std::vector<Triplet> out;
  out.reserve(traj.nodes().size());
  for (const auto& n : traj.nodes()) out.push_back({n.frame, n.label, n.action});
  return out;
}

Trajectory trajectory_from_triplets(std::string trajectory_id, std::string video_id, std::uint64_t seed,
                                    const std::vector<Triplet>& triplets, const TrajectoryLimits& limits) {
  std::vector<TrajectoryNode> nodes;
  for (const auto& t : triplets) {
    const bool room = t.label.has_value() || t.action.has_value();
    nodes.push_back({room ? NodeKind::Room : NodeKind::Transition, t.frame, t.label, t.action});
  }
  return Trajectory::create(std::move(trajectory_id), std::move(video_id), std::move(nodes), seed, limits);
}

}  // namespace vlnpairs

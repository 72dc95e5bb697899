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

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "vlnpairs/types.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs::testing {

struct RoomSpec {
  std::string room;
  std::vector<std::string> objects;
  Action action = Action::Stop;
};

// Grounded trajectory with the given rooms, `gap` transition frames between
// consecutive room nodes.
inline Trajectory make_trajectory(const std::vector<RoomSpec>& rooms, int gap = 1, std::string id = "vid-t0",
                                  std::string video = "vid") {
  std::vector<TrajectoryNode> nodes;
  std::uint32_t frame = 0;
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    if (i > 0) {
      for (int g = 0; g < gap; ++g) {
        nodes.push_back({NodeKind::Transition, {video, frame, frame * 0.5}, std::nullopt, std::nullopt});
        ++frame;
      }
    }
    nodes.push_back({NodeKind::Room,
                     {video, frame, frame * 0.5},
                     RoomLabel{rooms[i].room, rooms[i].objects, 0.9},
                     rooms[i].action});
    ++frame;
  }
  return Trajectory::create(std::move(id), std::move(video), std::move(nodes), 0);
}

inline const std::vector<std::string>& test_rooms() {
  static const std::vector<std::string> rooms = {"kitchen",  "living room", "dining room", "family room",
                                                 "bedroom",  "bathroom",    "hallway",     "office",
                                                 "laundry room", "garage",  "closet",      "staircase",
                                                 "balcony",  "patio",       "entryway",    "basement",
                                                 "attic",    "pantry",      "nursery",     "gym"};
  return rooms;
}

inline const std::vector<std::string>& test_objects() {
  static const std::vector<std::string> objects = {"sofa", "table", "lamp", "stove", "sink", "bed", "mirror",
                                                   "chairs", "rug", "plant", "desk", "shelf"};
  return objects;
}

// Random grounded trajectory with K rooms; consecutive rooms differ.
inline Trajectory random_trajectory(Rng& rng, int k, const std::string& id = "vid-t0", int max_gap = 3,
                                    bool with_objects = true) {
  std::vector<RoomSpec> rooms;
  const auto& names = test_rooms();
  for (int i = 0; i < k; ++i) {
    std::string room;
    do {
      room = names[rng.below(names.size())];
    } while (!rooms.empty() && rooms.back().room == room);
    RoomSpec spec{room, {}, Action::Stop};
    if (with_objects) {
      const auto n = rng.below(4);
      while (spec.objects.size() < n) {
        const auto& o = test_objects()[rng.below(test_objects().size())];
        if (std::find(spec.objects.begin(), spec.objects.end(), o) == spec.objects.end()) spec.objects.push_back(o);
      }
    }
    if (i + 1 < k) spec.action = kMovingActions[rng.below(3)];
    rooms.push_back(std::move(spec));
  }
  return make_trajectory(rooms, static_cast<int>(rng.below(static_cast<std::uint64_t>(max_gap) + 1)), id);
}

inline PathInstructionPair verified_pair(Trajectory traj, std::string text,
                                         Granularity g = Granularity::Coarse) {
  Instruction ins{std::move(text), g, "mock-faithful", 1, {}};
  VerificationRecord rec;
  rec.template_version = "000000000000";
  return {std::move(traj), std::move(ins), std::move(rec), PairStatus::Verified};
}

}  // namespace vlnpairs::testing

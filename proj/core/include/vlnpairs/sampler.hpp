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
#include <vector>

#include "vlnpairs/types.hpp"

namespace vlnpairs {

class LabelClient;

struct AnnotatedFrame {
  FrameRef frame;
  RoomLabel label;
  bool is_room_candidate = false;

  friend bool operator==(const AnnotatedFrame&, const AnnotatedFrame&) = default;
};

struct SamplerConfig {
  double confidence_threshold = 0.6;  // τ
  int min_rooms = 2;
  int max_rooms = 7;
  int max_transitions_between = 3;
  int trajectories_per_video = 8;
  std::uint64_t seed = 0;

  /// Throws Error(ConfigError) when the bounds are inconsistent.
  void validate() const;
  TrajectoryLimits limits() const { return {min_rooms, max_rooms}; }
};

/// Labels every frame once through `labeler` and marks room candidates
/// (room_confidence >= threshold). Frames must be non-empty and strictly
/// increasing in frame_index.
std::vector<AnnotatedFrame> annotate_frames(const std::vector<FrameRef>& frames, LabelClient& labeler,
                                            double confidence_threshold);

// A maximal stretch of candidate frames sharing a room type. Stretches of the
// same type separated only by non-candidate frames are merged, so adjacent
// runs always differ in room type.
struct CandidateRun {
  std::string room_type;
  std::vector<std::size_t> frames;  // indices into the annotated list

  /// Index of the representative (middle) frame.
  std::size_t representative() const { return frames[(frames.size() - 1) / 2]; }
};

std::vector<CandidateRun> candidate_runs(const std::vector<AnnotatedFrame>& annotated);

/// Deterministic for fixed (annotated, config, draw_index). Room nodes are
/// unlabeled; grounding attaches labels and actions afterwards.
/// Throws Error(NoValidTrajectory) when fewer than min_rooms distinct-room
/// runs exist.
Trajectory sample_trajectory(const std::vector<AnnotatedFrame>& annotated, const SamplerConfig& config,
                             std::uint64_t draw_index);

/// Draws 0..trajectories_per_video-1, dropping NoValidTrajectory draws and
/// duplicate node sequences.
std::vector<Trajectory> sample_many(const std::vector<AnnotatedFrame>& annotated, const SamplerConfig& config);

}  // namespace vlnpairs

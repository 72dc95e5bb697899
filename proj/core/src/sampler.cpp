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

#include "vlnpairs/sampler.hpp"

#include <algorithm>
#include <set>

#include "vlnpairs/error.hpp"
#include "vlnpairs/grounding.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

void SamplerConfig::validate() const {
  if (confidence_threshold < 0.0 || confidence_threshold > 1.0) {
    throw Error(ErrorCode::ConfigError, "sampler confidence_threshold must be in [0, 1]");
  }
  if (min_rooms < 2) throw Error(ErrorCode::ConfigError, "sampler min_rooms must be >= 2");
  if (max_rooms < min_rooms) throw Error(ErrorCode::ConfigError, "sampler max_rooms must be >= min_rooms");
  if (max_transitions_between < 0) throw Error(ErrorCode::ConfigError, "max_transitions_between must be >= 0");
  if (trajectories_per_video < 0) throw Error(ErrorCode::ConfigError, "trajectories_per_video must be >= 0");
}

std::vector<AnnotatedFrame> annotate_frames(const std::vector<FrameRef>& frames, LabelClient& labeler,
                                            double confidence_threshold) {
  if (frames.empty()) throw Error(ErrorCode::PreconditionViolated, "annotate_frames: no frames");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame_index <= frames[i - 1].frame_index) {
      throw Error(ErrorCode::PreconditionViolated, "annotate_frames: frame_index not strictly increasing");
    }
  }
  std::vector<AnnotatedFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    RoomLabel label = labeler.label(f);
    bool candidate = label.room_confidence >= confidence_threshold;
    out.push_back({f, std::move(label), candidate});
  }
  return out;
}

std::vector<CandidateRun> candidate_runs(const std::vector<AnnotatedFrame>& annotated) {
  std::vector<CandidateRun> runs;
  for (std::size_t i = 0; i < annotated.size(); ++i) {
    const auto& a = annotated[i];
    if (!a.is_room_candidate) continue;
    if (!runs.empty() && runs.back().room_type == a.label.room_type) {
      runs.back().frames.push_back(i);
    } else {
      runs.push_back({a.label.room_type, {i}});
    }
  }
  return runs;
}

namespace {

// Evenly spaced pick of at most `limit` of the given indices.
std::vector<std::size_t> spread(const std::vector<std::size_t>& pool, int limit) {
  if (static_cast<int>(pool.size()) <= limit) return pool;
  std::vector<std::size_t> out;
  const std::size_t c = pool.size();
  const std::size_t m = static_cast<std::size_t>(limit);
  for (std::size_t i = 0; i < m; ++i) out.push_back(pool[(i + 1) * c / (m + 1)]);
  return out;
}

bool alternating(const std::vector<CandidateRun>& runs, const std::vector<std::size_t>& chosen) {
  for (std::size_t i = 1; i < chosen.size(); ++i) {
    if (runs[chosen[i]].room_type == runs[chosen[i - 1]].room_type) return false;
  }
  return true;
}

}  // namespace

Trajectory sample_trajectory(const std::vector<AnnotatedFrame>& annotated, const SamplerConfig& config,
                             std::uint64_t draw_index) {
  config.validate();
  const auto runs = candidate_runs(annotated);
  const std::size_t run_count = runs.size();
  if (run_count < static_cast<std::size_t>(config.min_rooms)) {
    throw Error(ErrorCode::NoValidTrajectory,
                "only " + std::to_string(run_count) + " distinct-room segments, need " +
                    std::to_string(config.min_rooms));
  }

  Rng rng(config.seed, draw_index);
  const auto k_max = std::min<std::int64_t>(config.max_rooms, static_cast<std::int64_t>(run_count));
  const auto k = static_cast<std::size_t>(rng.between(config.min_rooms, k_max));

  std::vector<std::size_t> chosen;
  std::vector<std::size_t> order(run_count);
  for (int attempt = 0; attempt < 32 && chosen.empty(); ++attempt) {
    for (std::size_t i = 0; i < run_count; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::size_t> pick(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(pick.begin(), pick.end());
    if (alternating(runs, pick)) chosen = std::move(pick);
  }
  if (chosen.empty()) {
    // Adjacent runs always differ, so a contiguous window is always legal.
    const auto start = static_cast<std::size_t>(rng.below(run_count - k + 1));
    for (std::size_t i = 0; i < k; ++i) chosen.push_back(start + i);
  }

  std::vector<TrajectoryNode> nodes;
  std::size_t prev = 0;
  for (std::size_t c = 0; c < chosen.size(); ++c) {
    const std::size_t frame_pos = runs[chosen[c]].representative();
    if (c > 0) {
      std::vector<std::size_t> between;
      for (std::size_t i = prev + 1; i < frame_pos; ++i) {
        if (!annotated[i].is_room_candidate) between.push_back(i);
      }
      for (std::size_t i : spread(between, config.max_transitions_between)) {
        nodes.push_back({NodeKind::Transition, annotated[i].frame, std::nullopt, std::nullopt});
      }
    }
    nodes.push_back({NodeKind::Room, annotated[frame_pos].frame, std::nullopt, std::nullopt});
    prev = frame_pos;
  }

  const std::string video_id = annotated.front().frame.video_id;
  return Trajectory::create(video_id + "-t" + std::to_string(draw_index), video_id, std::move(nodes), config.seed,
                            config.limits());
}

std::vector<Trajectory> sample_many(const std::vector<AnnotatedFrame>& annotated, const SamplerConfig& config) {
  std::vector<Trajectory> out;
  std::set<std::vector<std::uint32_t>> seen;
  for (int draw = 0; draw < config.trajectories_per_video; ++draw) {
    try {
      Trajectory t = sample_trajectory(annotated, config, static_cast<std::uint64_t>(draw));
      std::vector<std::uint32_t> signature;
      for (const auto& n : t.nodes()) {
        signature.push_back(n.frame.frame_index * 2 + (n.is_room() ? 1u : 0u));
      }
      if (seen.insert(signature).second) out.push_back(std::move(t));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoValidTrajectory) throw;
    }
  }
  return out;
}

}  // namespace vlnpairs

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

#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/grounding.hpp"

namespace vlnpairs {
namespace {

// Unlabeled copy of a grounded trajectory.
Trajectory strip(const Trajectory& t) {
  auto nodes = t.nodes();
  for (auto& n : nodes) {
    n.label.reset();
    n.action.reset();
  }
  return Trajectory::create(t.id(), t.video_id(), nodes, t.seed());
}

Trajectory strip_actions(const Trajectory& t) {
  auto nodes = t.nodes();
  for (auto& n : nodes) n.action.reset();
  return Trajectory::create(t.id(), t.video_id(), nodes, t.seed());
}

class CountingLabeler : public LabelClient {
 public:
  RoomLabel label(const FrameRef& f) override {
    const int now = ++inflight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    ++calls;
    --inflight;
    return {f.frame_index % 2 ? "kitchen" : "bedroom", {"lamp"}, 0.9};
  }
  std::atomic<int> calls{0}, inflight{0}, peak{0};
};

class ScriptedActions : public ActionClient {
 public:
  explicit ScriptedActions(Action a) : action_(a) {}
  Action infer(const FrameRef& from, const FrameRef& to) override {
    seen.push_back({from.key(), to.key()});
    return action_;
  }
  std::vector<std::pair<std::string, std::string>> seen;

 private:
  Action action_;
};

TEST(StubLabelClient, MatchesShippedTable) {
  const std::string path = VLNPAIRS_DATA_DIR "/synthetic/stub_labels.tsv";
  auto client = StubLabelClient::from_file(path);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, '\t');) f.push_back(field);
    ASSERT_EQ(f.size(), 4u) << line;
    const auto slash = f[0].find('/');
    const FrameRef frame{f[0].substr(0, slash), static_cast<std::uint32_t>(std::stoul(f[0].substr(slash + 2))), 0.0};
    const auto label = client.label(frame);
    EXPECT_EQ(label.room_type, f[1]);
    EXPECT_DOUBLE_EQ(label.room_confidence, std::stod(f[3]));
    std::vector<std::string> objects;
    std::stringstream os(f[2]);
    for (std::string o; std::getline(os, o, ',');) objects.push_back(trim(o));
    EXPECT_EQ(label.objects, objects);
    ++rows;
  }
  EXPECT_EQ(rows, 28);
}

TEST(StubLabelClient, TableExample) {
  auto client = StubLabelClient::from_file(VLNPAIRS_DATA_DIR "/synthetic/stub_labels.tsv");
  const auto label = client.label({"video1", 7, 3.5});
  EXPECT_EQ(label.room_type, "kitchen");
  EXPECT_GE(label.room_confidence, 0.6);
}

TEST(StubLabelClient, FallbackIsSeededAndDeterministic) {
  StubLabelClient a({}, 1), b({}, 1);
  int differs = 0;
  for (std::uint32_t i = 0; i < 50; ++i) {
    const FrameRef f{"v", i, 0.0};
    const auto la = a.label(f);
    EXPECT_EQ(la, b.label(f));
    EXPECT_TRUE(RoomLexicon::builtin().canonicalize(la.room_type).has_value());
    EXPECT_GE(la.room_confidence, 0.5);
    EXPECT_LE(la.room_confidence, 1.0);
    StubLabelClient c({}, 2);
    differs += !(c.label(f) == la);
  }
  EXPECT_GT(differs, 25);
}

TEST(StubLabelClient, TableErrors) {
  const auto& lex = RoomLexicon::builtin();
  EXPECT_THROW(StubLabelClient::parse_table("v/f000\tkitchen\t\n", lex), Error);
  EXPECT_THROW(StubLabelClient::parse_table("v/f000\tspaceship\t\t0.5\n", lex), Error);
  EXPECT_THROW(StubLabelClient::parse_table("v/f000\tkitchen\t\t1.5\n", lex), Error);
  const auto table = StubLabelClient::parse_table("# c\nv/f000\tLounge\tsofa,lamp\t0.5\n", lex);
  EXPECT_EQ(table.at("v/f000").room_type, "living room");
}

TEST(StubActionClient, ScriptBothDirections) {
  const auto script = StubActionClient::parse_script("a/f000\tb/f001\tturn_left\nb/f001\ta/f000\tforward\n");
  StubActionClient client(script);
  EXPECT_EQ(client.infer({"a", 0, 0}, {"b", 1, 0}), Action::TurnLeft);
  EXPECT_EQ(client.infer({"b", 1, 0}, {"a", 0, 0}), Action::Forward);
  EXPECT_THROW(StubActionClient::parse_script("a\tb\tstop\n"), Error);
  EXPECT_THROW(StubActionClient::parse_script("a\tb\n"), Error);
}

TEST(StubActionClient, FallbackNeverStops) {
  StubActionClient client({}, 9);
  for (std::uint32_t i = 0; i < 100; ++i) {
    const auto a = client.infer({"v", i, 0}, {"v", i + 1, 0});
    EXPECT_NE(a, Action::Stop);
    EXPECT_EQ(a, client.infer({"v", i, 0}, {"v", i + 1, 0}));
  }
}

TEST(LabelNodes, LabelsRoomsOnly) {
  Rng rng(3);
  const auto grounded = testing::random_trajectory(rng, 5, "vid-t0", 2);
  CountingLabeler labeler;
  const auto labeled = label_nodes(strip(grounded), labeler);
  EXPECT_EQ(labeler.calls.load(), 5);
  EXPECT_TRUE(labeled.is_labeled());
  for (const auto& n : labeled.nodes()) {
    EXPECT_EQ(n.label.has_value(), n.is_room());
    EXPECT_FALSE(n.action.has_value());
  }
}

TEST(LabelNodes, BoundedInflight) {
  Rng rng(4);
  const auto t = strip(testing::random_trajectory(rng, 7));
  for (int limit : {1, 2, 3}) {
    CountingLabeler labeler;
    label_nodes(t, labeler, {limit, {}});
    EXPECT_EQ(labeler.calls.load(), 7);
    EXPECT_LE(labeler.peak.load(), limit);
  }
}

TEST(LabelNodes, RejectsLabeledInput) {
  const auto t = testing::make_trajectory({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}});
  CountingLabeler labeler;
  try {
    label_nodes(t, labeler);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PreconditionViolated);
  }
}

TEST(GroundActions, CallsPerConsecutivePairAndStopsAtEnd) {
  for (int k = 2; k <= 7; ++k) {
    Rng rng(static_cast<std::uint64_t>(k));
    const auto t = strip_actions(testing::random_trajectory(rng, k));
    ScriptedActions actions(Action::TurnRight);
    const auto g = ground_actions(t, actions);
    ASSERT_EQ(actions.seen.size(), static_cast<std::size_t>(k - 1));
    const auto rooms = g.room_nodes();
    for (int i = 0; i + 1 < k; ++i) {
      EXPECT_EQ(actions.seen[i].first, rooms[i]->frame.key());
      EXPECT_EQ(actions.seen[i].second, rooms[i + 1]->frame.key());
      EXPECT_EQ(rooms[i]->action, Action::TurnRight);
    }
    EXPECT_EQ(rooms.back()->action, Action::Stop);
  }
}

TEST(GroundActions, ScriptOracle) {
  const auto script = StubActionClient::parse_script(
      read_file(VLNPAIRS_DATA_DIR "/synthetic/stub_actions.tsv"));
  StubActionClient client(script);
  auto labels = StubLabelClient::from_file(VLNPAIRS_DATA_DIR "/synthetic/stub_labels.tsv");
  std::vector<TrajectoryNode> nodes;
  for (std::uint32_t f : {1u, 4u, 7u, 13u, 25u}) {
    nodes.push_back({f == 4 ? NodeKind::Transition : NodeKind::Room, {"video1", f, f * 0.5}, {}, {}});
  }
  const auto t = ground_actions(label_nodes(Trajectory::create("video1-t0", "video1", nodes, 0), labels), client);
  const auto rooms = t.room_nodes();
  ASSERT_EQ(rooms.size(), 4u);
  for (std::size_t i = 0; i + 1 < rooms.size(); ++i) {
    EXPECT_EQ(rooms[i]->action, script.at({rooms[i]->frame.key(), rooms[i + 1]->frame.key()}));
  }
  EXPECT_EQ(rooms[0]->label->room_type, "living room");
  EXPECT_EQ(rooms[3]->label->room_type, "bathroom");
}

TEST(GroundActions, StopFromClientIsAnError) {
  const auto t = strip_actions(testing::make_trajectory(
      {{"kitchen", {}, Action::Forward}, {"hallway", {}, Action::Forward}, {"bedroom", {}, Action::Stop}}));
  ScriptedActions stop(Action::Stop);
  EXPECT_THROW(ground_actions(t, stop), Error);
  ScriptedActions fwd(Action::Forward);
  EXPECT_THROW(ground_actions(strip(t), fwd), Error);
}

TEST(Triplets, ExampleView) {
  const auto t = testing::make_trajectory({{"kitchen", {"stove"}, Action::TurnLeft}, {"bedroom", {}, Action::Stop}}, 1);
  const auto view = triplet_view(t);
  ASSERT_EQ(view.size(), 3u);
  EXPECT_EQ(view[0].label->room_type, "kitchen");
  EXPECT_EQ(view[0].action, Action::TurnLeft);
  EXPECT_FALSE(view[1].label.has_value());
  EXPECT_FALSE(view[1].action.has_value());
  EXPECT_EQ(view[2].action, Action::Stop);
  EXPECT_THROW(triplet_view(strip(t)), Error);
}

TEST(Triplets, Bijection) {
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const int k = static_cast<int>(rng.between(2, 7));
    const auto t = testing::random_trajectory(rng, k, "vid-t" + std::to_string(i));
    const auto view = triplet_view(t);
    const auto back = trajectory_from_triplets(t.id(), t.video_id(), t.seed(), view);
    ASSERT_EQ(back, t);
    ASSERT_EQ(triplet_view(back), view);
  }
}

TEST(CachingLabelClient, OneInnerCallPerKey) {
  CountingLabeler inner;
  CachingLabelClient cache(inner);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (std::uint32_t i = 0; i < 20; ++i) cache.label({"v", i % 10, 0});
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(cache.misses(), 10u);
  EXPECT_GE(inner.calls.load(), 10);
}

}  // namespace
}  // namespace vlnpairs

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
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include "support.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/gateway.hpp"

namespace vlnpairs {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Prompt coarse_prompt(const std::vector<testing::RoomSpec>& rooms) {
  return build_generation_prompt(testing::make_trajectory(rooms), Granularity::Coarse);
}

std::vector<std::string> clauses(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(", ", pos);
    out.push_back(text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) return out;
    pos = comma + 2;
  }
}

fs::path temp_path(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vlnpairs_gateway_" + name);
  fs::remove(p);
  return p;
}

TEST(MockFaithful, ExampleRendering) {
  Gateway gw(GatewayConfig{});
  const auto c = gw.complete(coarse_prompt({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}}));
  EXPECT_EQ(c.text, "Start in the kitchen, go straight, then stop in the bedroom.");
  EXPECT_EQ(c.backend_id, "mock-faithful");
  EXPECT_TRUE(c.corruptions.empty());
  EXPECT_EQ(c.usage.attempts, 1);
}

TEST(MockFaithful, MentionsEveryRoomAndActionInOrder) {
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto t = testing::random_trajectory(rng, static_cast<int>(rng.between(2, 7)));
    const auto text = mock_render_generation(build_generation_prompt(t, Granularity::Coarse));
    std::size_t pos = 0;
    const auto rooms = t.room_nodes();
    for (std::size_t r = 0; r < rooms.size(); ++r) {
      pos = text.find("the " + rooms[r]->label->room_type, pos);
      ASSERT_NE(pos, std::string::npos) << text;
      if (r + 1 < rooms.size()) {
        pos = text.find(std::string(action_phrase(*rooms[r]->action)), pos);
        ASSERT_NE(pos, std::string::npos) << text;
      }
    }
  }
}

TEST(MockLossy, SwapChangesExactlyOneLabelOrAction) {
  Rng rng(5);
  int room_swaps = 0, action_swaps = 0;
  for (int i = 0; i < 500; ++i) {
    const auto t = testing::random_trajectory(rng, static_cast<int>(rng.between(2, 7)), "vid-t0", 2, false);
    const auto prompt = build_generation_prompt(t, Granularity::Coarse);
    const auto faithful = clauses(mock_render_generation(prompt));
    const auto lossy = mock_render_lossy(prompt, {9, 1.0, 0.0}, static_cast<std::uint64_t>(i), RoomLexicon::builtin());
    const auto got = clauses(lossy.text);
    ASSERT_EQ(got.size(), faithful.size());
    int differing = 0;
    for (std::size_t c = 0; c < got.size(); ++c) {
      if (got[c] == faithful[c]) continue;
      ++differing;
      ASSERT_EQ(lossy.corruptions.size(), 1u);
      const auto& corr = lossy.corruptions[0];
      if (corr.kind == Corruption::Kind::RoomSwap) {
        EXPECT_NE(faithful[c].find("the " + corr.before), std::string::npos);
        EXPECT_NE(got[c].find("the " + corr.after), std::string::npos);
        ++room_swaps;
      } else {
        ASSERT_EQ(corr.kind, Corruption::Kind::ActionSwap);
        EXPECT_NE(faithful[c].find(std::string(action_phrase(*action_from_name(corr.before)))), std::string::npos);
        EXPECT_NE(got[c].find(std::string(action_phrase(*action_from_name(corr.after)))), std::string::npos);
        ++action_swaps;
      }
    }
    ASSERT_EQ(differing, 1) << lossy.text;
  }
  EXPECT_GT(room_swaps, 100);
  EXPECT_GT(action_swaps, 100);
}

TEST(MockLossy, NoiseIsASingleInsertedFragment) {
  Rng rng(6);
  for (int i = 0; i < 300; ++i) {
    const auto t = testing::random_trajectory(rng, static_cast<int>(rng.between(2, 7)));
    const auto prompt = build_generation_prompt(t, i % 2 ? Granularity::Fine : Granularity::Coarse);
    const auto faithful = mock_render_generation(prompt);
    const auto lossy = mock_render_lossy(prompt, {3, 0.0, 1.0}, static_cast<std::uint64_t>(i), RoomLexicon::builtin());
    ASSERT_EQ(lossy.corruptions.size(), 1u);
    const auto& fragment = lossy.corruptions[0].after;
    const auto& pool = mock_noise_fragments();
    EXPECT_NE(std::find(pool.begin(), pool.end(), fragment), pool.end());
    ASSERT_EQ(lossy.text.size(), faithful.size() + fragment.size() + 1);
    bool found = false;
    for (std::size_t at = 0; at + fragment.size() < lossy.text.size() && !found; ++at) {
      for (const std::string& piece : {" " + fragment, fragment + " "}) {
        if (lossy.text.compare(at, piece.size(), piece) == 0 &&
            lossy.text.substr(0, at) + lossy.text.substr(at + piece.size()) == faithful) {
          found = true;
        }
      }
    }
    EXPECT_TRUE(found) << lossy.text;
  }
}

TEST(MockLossy, DegenerateParametersMatchFaithful) {
  Rng rng(7);
  GatewayConfig cfg;
  cfg.backend = MockLossyBackend{42, 0.0, 0.0};
  Gateway lossy(cfg);
  Gateway faithful(GatewayConfig{});
  for (int i = 0; i < 100; ++i) {
    const auto p = build_generation_prompt(testing::random_trajectory(rng, static_cast<int>(rng.between(2, 7))),
                                           i % 2 ? Granularity::Fine : Granularity::Coarse);
    const auto c = lossy.complete(p);
    EXPECT_EQ(c.text, faithful.complete(p).text);
    EXPECT_TRUE(c.corruptions.empty());
  }
}

TEST(MockLossy, DeterministicUnderConcurrency) {
  Rng rng(8);
  std::vector<Prompt> prompts;
  for (int i = 0; i < 40; ++i) {
    prompts.push_back(build_generation_prompt(testing::random_trajectory(rng, static_cast<int>(rng.between(2, 7))),
                                              Granularity::Coarse));
  }
  GatewayConfig cfg;
  cfg.backend = MockLossyBackend{11, 0.5, 0.5};
  cfg.max_inflight = 8;
  Gateway sequential(cfg), concurrent(cfg);
  std::vector<std::future<Completion>> futures;
  for (const auto& p : prompts) {
    futures.push_back(std::async(std::launch::async, [&concurrent, &p] { return concurrent.complete(p); }));
  }
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto a = sequential.complete(prompts[i]);
    const auto b = futures[i].get();
    EXPECT_EQ(a.text, b.text);
    EXPECT_EQ(a.corruptions, b.corruptions);
  }
}

TEST(MockExtraction, PairsByProximity) {
  const auto p = build_extraction_prompt(
      "Start from the dining room, turn left into the family room, then go straight into the living room.");
  EXPECT_EQ(mock_answer_extraction(p, RoomLexicon::builtin(), ActionSynonyms::builtin()),
            "(dining room, turn left)\n(family room, go straight)\n");
}

TEST(Gateway, RequestKeyDependsOnAttempt) {
  Gateway gw(GatewayConfig{});
  const auto p = coarse_prompt({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}});
  EXPECT_EQ(gw.request_key(p, {1}), gw.request_key(p, {1}));
  EXPECT_NE(gw.request_key(p, {1}), gw.request_key(p, {2}));
}

TEST(Gateway, CountersByFamily) {
  Gateway gw(GatewayConfig{});
  gw.complete(coarse_prompt({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}}));
  gw.complete(build_extraction_prompt("Start in the kitchen, go straight, then stop in the bedroom."));
  const auto c = gw.counters();
  EXPECT_EQ(c.requests, 2u);
  EXPECT_EQ(c.generation_requests, 1u);
  EXPECT_EQ(c.extraction_requests, 1u);
  EXPECT_EQ(c.inflight, 0);
}

TEST(GatewayConfig, Validation) {
  GatewayConfig c;
  c.backend = MockLossyBackend{0, 1.2, 0.0};
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.max_inflight = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.backend = RemoteBackend{};
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.backend = ReplayBackend{};
  EXPECT_THROW(c.validate(), Error);
}

// Scripted transport: returns responses in order and records each call.
struct ScriptedTransport {
  std::vector<HttpResponse> responses;
  std::shared_ptr<std::vector<std::pair<std::string, std::map<std::string, std::string>>>> calls =
      std::make_shared<std::vector<std::pair<std::string, std::map<std::string, std::string>>>>();
  std::shared_ptr<std::size_t> next = std::make_shared<std::size_t>(0);

  HttpPost fn() {
    return [this](const std::string&, const std::string& body, const std::map<std::string, std::string>& headers,
                  std::chrono::milliseconds) {
      calls->push_back({body, headers});
      // The last response repeats once the script runs out.
      const std::size_t i = std::min((*next)++, responses.size() - 1);
      return responses[i];
    };
  }
};

HttpResponse ok(const std::string& text) {
  json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
               {"usage", {{"prompt_tokens", 120}, {"completion_tokens", 17}}}};
  return {200, body.dump(), false, ""};
}

GatewayConfig remote_config() {
  GatewayConfig cfg;
  cfg.backend = RemoteBackend{"http://lmm.invalid/v1/chat/completions", "test-model", "VLNPAIRS_TEST_KEY", 0.2};
  cfg.initial_backoff = std::chrono::milliseconds(1);
  return cfg;
}

TEST(RemoteBackend, RetriesServerErrorsThenSucceeds) {
  ScriptedTransport t{{{503, "busy", false, ""}, {500, "oops", false, ""}, ok("Go.")}};
  ::setenv("VLNPAIRS_TEST_KEY", "secret", 1);
  Gateway gw(remote_config(), RoomLexicon::builtin(), ActionSynonyms::builtin(), t.fn());
  const auto c = gw.complete(coarse_prompt({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}}));
  EXPECT_EQ(c.text, "Go.");
  EXPECT_EQ(c.usage.attempts, 3);
  EXPECT_EQ(c.usage.prompt_tokens, 120);
  EXPECT_EQ(c.usage.completion_tokens, 17);
  EXPECT_EQ(c.backend_id, "remote:test-model");
  ASSERT_EQ(t.calls->size(), 3u);
  EXPECT_EQ(t.calls->at(0).second.at("Authorization"), "Bearer secret");
  EXPECT_EQ(gw.counters().backend_attempts, 3u);
}

TEST(RemoteBackend, ClientErrorIsNotRetried) {
  ScriptedTransport t{{{400, "bad request", false, ""}, ok("never")}};
  Gateway gw(remote_config(), RoomLexicon::builtin(), ActionSynonyms::builtin(), t.fn());
  try {
    gw.complete(build_extraction_prompt("Go straight."));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendRejected);
    EXPECT_EQ(e.attempts(), 1);
  }
  EXPECT_EQ(t.calls->size(), 1u);
  EXPECT_EQ(gw.counters().failures, 1u);
}

TEST(RemoteBackend, TimeoutsAndExhaustion) {
  {
    ScriptedTransport t{{{0, "", true, "timed out"}}};
    Gateway gw(remote_config(), RoomLexicon::builtin(), ActionSynonyms::builtin(), t.fn());
    try {
      gw.complete(build_extraction_prompt("Go straight."));
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::BackendTimeout);
      EXPECT_EQ(e.attempts(), 3);
    }
  }
  {
    ScriptedTransport t{{{0, "", true, "timed out"}, {502, "gateway", false, ""}, {429, "slow down", false, ""}}};
    Gateway gw(remote_config(), RoomLexicon::builtin(), ActionSynonyms::builtin(), t.fn());
    try {
      gw.complete(build_extraction_prompt("Go straight."));
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::RetriesExhausted);
      EXPECT_EQ(e.attempts(), 3);
    }
    EXPECT_EQ(t.calls->size(), 3u);
  }
  {
    ScriptedTransport t{{{200, "not json", false, ""}}};
    Gateway gw(remote_config(), RoomLexicon::builtin(), ActionSynonyms::builtin(), t.fn());
    EXPECT_THROW(gw.complete(build_extraction_prompt("Go straight.")), Error);
  }
}

TEST(RemoteBackend, RequestBodyShape) {
  Prompt p = coarse_prompt({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}});
  p.images[0].bytes = "abc";
  p.images[0].mime_type = "image/png";
  const auto j = json::parse(remote_request_body(p, {"http://x", "m", "", 0.2}));
  EXPECT_EQ(j.at("model"), "m");
  EXPECT_DOUBLE_EQ(j.at("temperature").get<double>(), 0.2);
  ASSERT_EQ(j.at("messages").size(), 2u);
  EXPECT_EQ(j.at("messages")[0].at("role"), "system");
  const auto& content = j.at("messages")[1].at("content");
  EXPECT_EQ(content[0].at("text"), p.user_text);
  ASSERT_EQ(content.size(), 2u);  // only attachments with bytes are sent
  EXPECT_EQ(content[1].at("image_url").at("url"), "data:image/png;base64,YWJj");
}

TEST(RemoteBackend, MaxInflightUnderStress) {
  for (int limit : {1, 3, 6}) {
    GatewayConfig cfg = remote_config();
    cfg.max_inflight = limit;
    std::atomic<int> live{0}, peak{0};
    HttpPost slow = [&](const std::string&, const std::string&, const std::map<std::string, std::string>&,
                        std::chrono::milliseconds) {
      const int now = ++live;
      int seen = peak.load();
      while (now > seen && !peak.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(3));
      --live;
      return ok("Go.");
    };
    Gateway gw(cfg, RoomLexicon::builtin(), ActionSynonyms::builtin(), slow);
    std::vector<std::thread> threads;
    for (int i = 0; i < 24; ++i) {
      threads.emplace_back([&gw] {
        for (int j = 0; j < 4; ++j) gw.complete(build_extraction_prompt("Go straight."));
      });
    }
    for (auto& th : threads) th.join();
    const auto c = gw.counters();
    EXPECT_EQ(c.requests, 96u);
    EXPECT_LE(c.peak_inflight, limit);
    EXPECT_LE(peak.load(), limit);
    EXPECT_EQ(peak.load(), limit);  // the stress actually saturates the limit
    EXPECT_EQ(c.inflight, 0);
  }
}

TEST(RateLimit, TokenBucketSpacesRequests) {
  GatewayConfig cfg;
  cfg.requests_per_second = 50;
  Gateway gw(cfg);
  const auto p = build_extraction_prompt("Go straight.");
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 11; ++i) gw.complete(p, {i + 1});
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_GE(elapsed, 0.18);
}

TEST(Journal, ReplayReproducesRun) {
  const auto path = temp_path("journal.log");
  GatewayConfig cfg;
  cfg.backend = MockLossyBackend{13, 0.5, 0.5};
  cfg.journal_path = path.string();
  Rng rng(31);
  std::vector<Prompt> prompts;
  std::vector<Completion> first;
  {
    Gateway gw(cfg);
    for (int i = 0; i < 30; ++i) {
      prompts.push_back(build_generation_prompt(testing::random_trajectory(rng, static_cast<int>(rng.between(2, 7))),
                                                Granularity::Fine));
      first.push_back(gw.complete(prompts.back(), {1 + i % 3}));
    }
  }
  EXPECT_EQ(Journal::read_all(path.string()).size(), 30u);

  GatewayConfig replay;
  replay.backend = ReplayBackend{path.string()};
  Gateway gw(replay);
  for (int i = 0; i < 30; ++i) {
    const auto c = gw.complete(prompts[i], {1 + i % 3});
    EXPECT_EQ(c.text, first[i].text);
    EXPECT_EQ(c.corruptions, first[i].corruptions);
    EXPECT_EQ(c.request_key, first[i].request_key);
  }
  try {
    gw.complete(prompts[0], {99});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendRejected);
  }
  fs::remove(path);
}

TEST(Journal, TruncatedRecordIsSchemaMismatch) {
  const auto path = temp_path("truncated.log");
  {
    Journal j(path.string());
    j.append({"k1", R"({"a":1})", R"({"text":"x"})"});
    j.append({"k2", R"({"a":2})", R"({"text":"y"})"});
  }
  ASSERT_EQ(Journal::index(path.string()).size(), 2u);
  const auto full = read_file(path.string());
  std::ofstream(path, std::ios::binary | std::ios::trunc) << full.substr(0, full.size() - 5);
  try {
    Journal::read_all(path.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaMismatch);
  }
  fs::remove(path);
}

}  // namespace
}  // namespace vlnpairs

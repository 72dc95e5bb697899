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

#include "vlnpairs/gateway.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include "vlnpairs/error.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

using nlohmann::json;

std::string_view to_string(Corruption::Kind k) {
  switch (k) {
    case Corruption::Kind::RoomSwap: return "room_swap";
    case Corruption::Kind::ActionSwap: return "action_swap";
    case Corruption::Kind::Noise: return "noise";
  }
  return "noise";
}

void GatewayConfig::validate() const {
  if (max_inflight < 1) throw Error(ErrorCode::ConfigError, "gateway max_inflight must be >= 1");
  if (retry_limit < 1) throw Error(ErrorCode::ConfigError, "gateway retry_limit must be >= 1");
  if (request_timeout_s <= 0) throw Error(ErrorCode::ConfigError, "gateway request_timeout_s must be > 0");
  if (requests_per_second < 0) throw Error(ErrorCode::ConfigError, "gateway requests_per_second must be >= 0");
  if (const auto* lossy = std::get_if<MockLossyBackend>(&backend)) {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(lossy->swap_prob) || !in_unit(lossy->noise_prob)) {
      throw Error(ErrorCode::ConfigError, "mock-lossy probabilities must lie in [0, 1]");
    }
  }
  if (const auto* remote = std::get_if<RemoteBackend>(&backend)) {
    if (remote->endpoint.empty() || remote->model.empty()) {
      throw Error(ErrorCode::ConfigError, "remote backend needs endpoint and model");
    }
  }
  if (const auto* replay = std::get_if<ReplayBackend>(&backend)) {
    if (replay->journal_path.empty()) throw Error(ErrorCode::ConfigError, "replay backend needs a journal path");
  }
}

// ---------------------------------------------------------------------------
// Journal

Journal::Journal(std::string path) : path_(std::move(path)) {}

void Journal::append(const JournalEntry& entry) {
  json record = {{"key", entry.key},
                 {"request", json::parse(entry.request_json)},
                 {"response", json::parse(entry.response_json)}};
  const std::string payload = record.dump();
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot open journal " + path_);
  out << payload.size() << '\n' << payload << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "journal write failed: " + path_);
}

std::vector<JournalEntry> Journal::read_all(const std::string& path) {
  const std::string data = read_file(path);
  std::vector<JournalEntry> out;
  std::size_t pos = 0;
  int record = 0;
  while (pos < data.size()) {
    ++record;
    std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) {
      throw Error(ErrorCode::SchemaMismatch, path + ": record " + std::to_string(record) + " has no length line");
    }
    std::size_t len = 0;
    try {
      len = std::stoull(data.substr(pos, nl - pos));
    } catch (const std::exception&) {
      throw Error(ErrorCode::SchemaMismatch, path + ": record " + std::to_string(record) + " has a bad length");
    }
    if (nl + 1 + len + 1 > data.size() || data[nl + 1 + len] != '\n') {
      throw Error(ErrorCode::SchemaMismatch, path + ": record " + std::to_string(record) + " is truncated");
    }
    try {
      json j = json::parse(data.substr(nl + 1, len));
      out.push_back({j.at("key").get<std::string>(), j.at("request").dump(), j.at("response").dump()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch,
                  path + ": record " + std::to_string(record) + " is malformed: " + e.what());
    }
    pos = nl + 1 + len + 1;
  }
  return out;
}

std::map<std::string, JournalEntry> Journal::index(const std::string& path) {
  std::map<std::string, JournalEntry> idx;
  for (auto& e : read_all(path)) idx[e.key] = std::move(e);
  return idx;
}

// ---------------------------------------------------------------------------
// Mocks

namespace {

Granularity granularity_of(const Prompt& prompt) {
  return prompt.template_id == "generation/fine" ? Granularity::Fine : Granularity::Coarse;
}

std::vector<RouteStep> route_of(const Prompt& prompt) {
  auto steps = route_steps(parse_triplet_block(prompt.user_text));
  if (steps.size() < 2 || steps.back().action != Action::Stop) {
    throw Error(ErrorCode::PreconditionViolated, "mock backend: prompt carries no parsable route");
  }
  return steps;
}

}  // namespace

const std::vector<std::string>& mock_noise_fragments() {
  static const std::vector<std::string> fragments = {
      std::string("\x00\x00", 2),
      "\x01\x02\x03",
      "\x1b\x7f",
      "##",
      "###",
      "**",
      "@@",
      "~~~",
      "<<>>",
      "|||",
      "$$",
      "%%",
      "^^",
      "==",
      "__",
      "\n\n",
      "\t",
      "{{triplets}}",
      "{{format_example}}",
      "{{task_definition}}",
      "{{instruction}}",
      "Triplets:",
      "Example output format:",
      "Instruction:",
      "Task:",
      "(image#2, None, None)",
      "(image#1, living room, Forward)",
      "image#3",
  };
  return fragments;
}

std::string mock_render_generation(const Prompt& prompt) {
  return render_reference_instruction(route_of(prompt), granularity_of(prompt));
}

LossyOutcome mock_render_lossy(const Prompt& prompt, const MockLossyBackend& spec, std::uint64_t stream,
                               const RoomLexicon& lexicon) {
  auto steps = route_of(prompt);
  Rng rng(spec.seed, stream);
  LossyOutcome out;

  // Both draws happen unconditionally so that p and q select independent
  // events from the same stream.
  const bool swap = rng.bernoulli(spec.swap_prob);
  const bool noise = rng.bernoulli(spec.noise_prob);

  if (swap) {
    const std::size_t k = steps.size();
    const std::size_t slot = static_cast<std::size_t>(rng.below(2 * k - 1));
    if (slot < k) {
      const auto& rooms = lexicon.canonical_terms();
      std::string replacement;
      do {
        replacement = rooms[rng.below(rooms.size())];
      } while (replacement == steps[slot].room);
      out.corruptions.push_back(
          {Corruption::Kind::RoomSwap, static_cast<int>(slot), steps[slot].room, replacement});
      steps[slot].room = replacement;
    } else {
      const std::size_t node = slot - k;
      Action replacement;
      do {
        replacement = kMovingActions[rng.below(3)];
      } while (replacement == steps[node].action);
      out.corruptions.push_back({Corruption::Kind::ActionSwap, static_cast<int>(node),
                                 std::string(to_string(steps[node].action)), std::string(to_string(replacement))});
      steps[node].action = replacement;
    }
  }

  out.text = render_reference_instruction(steps, granularity_of(prompt));

  if (noise) {
    const auto& fragments = mock_noise_fragments();
    const std::string& fragment = fragments[rng.below(fragments.size())];
    // Insertion points: text start, every space, and just before the final
    // punctuation mark.
    std::vector<std::size_t> points{0};
    for (std::size_t i = 0; i < out.text.size(); ++i) {
      if (out.text[i] == ' ') points.push_back(i);
    }
    points.push_back(out.text.size() - 1);
    const std::size_t at = points[rng.below(points.size())];
    if (at == 0) {
      out.text = fragment + " " + out.text;
    } else {
      out.text.insert(at, " " + fragment);
    }
    out.corruptions.push_back({Corruption::Kind::Noise, -1, "", fragment});
  }
  return out;
}

std::string mock_answer_extraction(const Prompt& prompt, const RoomLexicon& lexicon,
                                   const ActionSynonyms& actions) {
  auto text = instruction_from_extraction_prompt(prompt);
  if (!text) throw Error(ErrorCode::PreconditionViolated, "mock backend: extraction prompt has no instruction");

  // Merge room and action mentions by position and walk them left to right,
  // remembering the room the agent is currently in.
  struct Hit {
    std::size_t pos;
    bool is_room;
    std::string value;
  };
  std::vector<Hit> hits;
  for (auto& m : lexicon.find_mentions(*text)) hits.push_back({m.begin, true, m.canonical});
  for (auto& m : actions.find_mentions(*text)) hits.push_back({m.begin, false, m.canonical});
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });

  std::string answer;
  std::optional<std::string> current;
  for (const auto& h : hits) {
    if (h.is_room) {
      current = h.value;
      continue;
    }
    Action a = *action_from_name(h.value);
    if (a == Action::Stop || !current) continue;
    answer += "(" + *current + ", " + std::string(action_phrase(a)) + ")\n";
  }
  return answer;
}

// ---------------------------------------------------------------------------
// Gateway

namespace {

class TokenBucket {
 public:
  explicit TokenBucket(double rate) : rate_(rate), tokens_(rate > 0 ? 1.0 : 0.0) {}

  void acquire() {
    if (rate_ <= 0) return;
    std::unique_lock lock(mu_);  // serializes token acquisition
    auto now = std::chrono::steady_clock::now();
    if (last_ == std::chrono::steady_clock::time_point{}) last_ = now;
    tokens_ = std::min(1.0, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    if (tokens_ < 1.0) {
      auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      std::this_thread::sleep_for(wait);
      last_ = std::chrono::steady_clock::now();
      tokens_ = 1.0;
    }
    tokens_ -= 1.0;
  }

 private:
  double rate_;
  double tokens_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point last_{};
};

json corruptions_to_json(const std::vector<Corruption>& cs) {
  json arr = json::array();
  for (const auto& c : cs) {
    arr.push_back({{"kind", std::string(to_string(c.kind))},
                   {"node_index", c.node_index},
                   {"before", c.before},
                   {"after", c.after}});
  }
  return arr;
}

std::vector<Corruption> corruptions_from_json(const json& arr) {
  std::vector<Corruption> out;
  for (const auto& j : arr) {
    Corruption c;
    const auto kind = j.at("kind").get<std::string>();
    c.kind = kind == "room_swap" ? Corruption::Kind::RoomSwap
             : kind == "action_swap" ? Corruption::Kind::ActionSwap
                                     : Corruption::Kind::Noise;
    c.node_index = j.at("node_index").get<int>();
    c.before = j.at("before").get<std::string>();
    c.after = j.at("after").get<std::string>();
    out.push_back(std::move(c));
  }
  return out;
}

json request_json(const Prompt& prompt, const RequestOptions& options, const std::string& backend_id) {
  json images = json::array();
  for (const auto& img : prompt.images) {
    images.push_back({{"frame_key", img.frame_key}, {"sha256", sha256_hex(img.bytes)}});
  }
  return {{"backend", backend_id},
          {"template_id", prompt.template_id},
          {"template_version", prompt.template_version},
          {"system", prompt.system_text},
          {"user", prompt.user_text},
          {"images", images},
          {"attempt", options.attempt}};
}

}  // namespace

std::string remote_request_body(const Prompt& prompt, const RemoteBackend& backend) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", prompt.user_text}});
  for (const auto& img : prompt.images) {
    if (img.bytes.empty()) continue;
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:" + img.mime_type + ";base64," + base64_encode(img.bytes)}}}});
  }
  json messages = json::array();
  if (!prompt.system_text.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system_text}});
  messages.push_back({{"role", "user"}, {"content", content}});
  json body = {{"model", backend.model}, {"messages", messages}, {"temperature", backend.temperature}};
  return body.dump();
}

struct Gateway::Impl {
  const RoomLexicon& lexicon;
  const ActionSynonyms& actions;
  HttpPost transport;
  std::counting_semaphore<> slots;
  TokenBucket bucket;
  std::unique_ptr<Journal> journal;
  std::map<std::string, JournalEntry> replay;

  mutable std::mutex counters_mu;
  Counters counters;

  Impl(const GatewayConfig& cfg, const RoomLexicon& lex, const ActionSynonyms& act, HttpPost t)
      : lexicon(lex),
        actions(act),
        transport(std::move(t)),
        slots(cfg.max_inflight),
        bucket(cfg.requests_per_second) {}

  Completion call_remote(const GatewayConfig& cfg, const RemoteBackend& remote, const Prompt& prompt) {
    std::map<std::string, std::string> headers;
    if (!remote.credential_env.empty()) {
      if (const char* key = std::getenv(remote.credential_env.c_str()); key && *key) {
        headers["Authorization"] = std::string("Bearer ") + key;
      }
    }
    const std::string body = remote_request_body(prompt, remote);
    const auto timeout = std::chrono::milliseconds(static_cast<long long>(cfg.request_timeout_s * 1000));
    auto backoff = cfg.initial_backoff;
    bool all_timeouts = true;
    std::string last_error;
    for (int attempt = 1; attempt <= cfg.retry_limit; ++attempt) {
      {
        std::lock_guard lock(counters_mu);
        ++counters.backend_attempts;
      }
      HttpResponse res = transport(remote.endpoint, body, headers, timeout);
      if (res.status >= 200 && res.status < 300) {
        try {
          json j = json::parse(res.body);
          const auto& message = j.at("choices").at(0).at("message");
          std::string text;
          const auto& content = message.at("content");
          if (content.is_string()) {
            text = content.get<std::string>();
          } else {
            for (const auto& part : content) {
              if (part.value("type", "") == "text") text += part.value("text", "");
            }
          }
          Completion c;
          c.text = std::move(text);
          c.usage.attempts = attempt;
          if (j.contains("usage")) {
            const auto& u = j["usage"];
            if (u.contains("prompt_tokens")) c.usage.prompt_tokens = u["prompt_tokens"].get<int>();
            if (u.contains("completion_tokens")) c.usage.completion_tokens = u["completion_tokens"].get<int>();
          }
          return c;
        } catch (const json::exception& e) {
          throw Error(ErrorCode::BackendRejected, std::string("unparsable completion response: ") + e.what(),
                      attempt);
        }
      }
      const bool retryable = res.status == 0 || res.status == 408 || res.status == 429 || res.status >= 500;
      last_error = res.status == 0 ? "transport: " + res.error
                                   : "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200);
      if (!retryable) throw Error(ErrorCode::BackendRejected, last_error, attempt);
      all_timeouts = all_timeouts && res.timed_out;
      if (attempt < cfg.retry_limit) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
    if (all_timeouts) throw Error(ErrorCode::BackendTimeout, last_error, cfg.retry_limit);
    throw Error(ErrorCode::RetriesExhausted, last_error, cfg.retry_limit);
  }
};

Gateway::Gateway(GatewayConfig config, const RoomLexicon& lexicon, const ActionSynonyms& actions,
                 HttpPost transport)
    : config_(std::move(config)) {
  config_.validate();
  if (!transport) transport = default_http_post();
  impl_ = std::make_unique<Impl>(config_, lexicon, actions, std::move(transport));
  if (!config_.journal_path.empty()) impl_->journal = std::make_unique<Journal>(config_.journal_path);
  if (const auto* r = std::get_if<ReplayBackend>(&config_.backend)) impl_->replay = Journal::index(r->journal_path);
}

Gateway::~Gateway() = default;

std::string Gateway::backend_id() const {
  return std::visit(
      [](const auto& b) -> std::string {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, MockFaithfulBackend>) return "mock-faithful";
        if constexpr (std::is_same_v<T, MockLossyBackend>) return "mock-lossy";
        if constexpr (std::is_same_v<T, ReplayBackend>) return "replay";
        if constexpr (std::is_same_v<T, RemoteBackend>) return "remote:" + b.model;
      },
      config_.backend);
}

std::string Gateway::request_key(const Prompt& prompt, const RequestOptions& options) const {
  // Replay answers requests recorded by any backend, so the backend id is
  // not part of the key.
  return sha256_hex(request_json(prompt, options, "").dump());
}

Gateway::Counters Gateway::counters() const {
  std::lock_guard lock(impl_->counters_mu);
  return impl_->counters;
}

Completion Gateway::complete(const Prompt& prompt, const RequestOptions& options) {
  const bool generation = prompt.template_id.rfind("generation", 0) == 0;
  {
    std::lock_guard lock(impl_->counters_mu);
    ++impl_->counters.requests;
    if (generation) ++impl_->counters.generation_requests;
    if (prompt.template_id == kExtractionTemplateId) ++impl_->counters.extraction_requests;
  }

  impl_->slots.acquire();
  {
    std::lock_guard lock(impl_->counters_mu);
    ++impl_->counters.inflight;
    impl_->counters.peak_inflight = std::max(impl_->counters.peak_inflight, impl_->counters.inflight);
  }
  struct Release {
    Impl* impl;
    ~Release() {
      {
        std::lock_guard lock(impl->counters_mu);
        --impl->counters.inflight;
      }
      impl->slots.release();
    }
  } release{impl_.get()};

  impl_->bucket.acquire();

  const std::string key = request_key(prompt, options);
  Completion result;
  try {
    result = std::visit(
        [&](const auto& backend) -> Completion {
          using T = std::decay_t<decltype(backend)>;
          Completion c;
          if constexpr (std::is_same_v<T, RemoteBackend>) {
            return impl_->call_remote(config_, backend, prompt);
          } else if constexpr (std::is_same_v<T, ReplayBackend>) {
            std::lock_guard lock(impl_->counters_mu);
            ++impl_->counters.backend_attempts;
            auto it = impl_->replay.find(key);
            if (it == impl_->replay.end()) {
              throw Error(ErrorCode::BackendRejected, "request " + key.substr(0, 12) + " not in journal", 1);
            }
            json r = json::parse(it->second.response_json);
            c.text = r.at("text").get<std::string>();
            c.corruptions = corruptions_from_json(r.at("corruptions"));
            return c;
          } else {
            {
              std::lock_guard lock(impl_->counters_mu);
              ++impl_->counters.backend_attempts;
            }
            if (prompt.template_id == kExtractionTemplateId) {
              c.text = mock_answer_extraction(prompt, impl_->lexicon, impl_->actions);
            } else if constexpr (std::is_same_v<T, MockLossyBackend>) {
              auto lossy = mock_render_lossy(prompt, backend, hash64(key), impl_->lexicon);
              c.text = std::move(lossy.text);
              c.corruptions = std::move(lossy.corruptions);
            } else {
              c.text = mock_render_generation(prompt);
            }
            return c;
          }
        },
        config_.backend);
  } catch (const Error& e) {
    std::lock_guard lock(impl_->counters_mu);
    ++impl_->counters.failures;
    throw;
  }

  result.backend_id = backend_id();
  result.request_key = key;
  result.usage.prompt_chars = prompt.system_text.size() + prompt.user_text.size();
  result.usage.completion_chars = result.text.size();

  if (impl_->journal) {
    json response = {{"text", result.text},
                     {"backend_id", result.backend_id},
                     {"attempts", result.usage.attempts},
                     {"corruptions", corruptions_to_json(result.corruptions)}};
    impl_->journal->append({key, request_json(prompt, options, result.backend_id).dump(), response.dump()});
  }
  return result;
}

}  // namespace vlnpairs

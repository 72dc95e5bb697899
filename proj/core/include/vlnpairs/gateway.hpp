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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vlnpairs/lexicon.hpp"
#include "vlnpairs/promptgen.hpp"

namespace vlnpairs {

// ---------------------------------------------------------------------------
// Backend selection

struct RemoteBackend {
  std::string endpoint;  // e.g. "https://api.openai.com/v1/chat/completions"
  std::string model;
  std::string credential_env = "OPENAI_API_KEY";  // name of the env var holding the key
  double temperature = 0.2;
};

struct MockFaithfulBackend {
  std::uint64_t seed = 0;
};

struct MockLossyBackend {
  std::uint64_t seed = 0;
  double swap_prob = 0.0;   // p: swap one room label or action
  double noise_prob = 0.0;  // q: inject a special-character run or template fragment
};

// Answers from a previously written journal; unknown requests are rejected.
struct ReplayBackend {
  std::string journal_path;
};

using BackendSpec = std::variant<RemoteBackend, MockFaithfulBackend, MockLossyBackend, ReplayBackend>;

struct GatewayConfig {
  BackendSpec backend = MockFaithfulBackend{};
  int max_inflight = 4;
  double request_timeout_s = 60.0;
  int retry_limit = 3;
  std::chrono::milliseconds initial_backoff{250};
  double requests_per_second = 0.0;  // 0 disables the token bucket
  std::string journal_path;          // empty disables journaling

  /// Throws Error(ConfigError).
  void validate() const;
};

// ---------------------------------------------------------------------------
// Results

// One corruption injected by the lossy mock. node_index is the room-node
// ordinal (0-based) for swaps and -1 for noise.
struct Corruption {
  enum class Kind { RoomSwap, ActionSwap, Noise };

  Kind kind = Kind::Noise;
  int node_index = -1;
  std::string before;
  std::string after;

  friend bool operator==(const Corruption&, const Corruption&) = default;
};

std::string_view to_string(Corruption::Kind k);

struct Usage {
  std::size_t prompt_chars = 0;
  std::size_t completion_chars = 0;
  int attempts = 1;
  std::optional<int> prompt_tokens;      // reported by remote backends
  std::optional<int> completion_tokens;
};

struct Completion {
  std::string text;
  Usage usage;
  std::string backend_id;
  std::string request_key;  // content hash used as the journal key
  std::vector<Corruption> corruptions;
};

struct RequestOptions {
  // Regeneration attempt number; part of the request key so that each
  // attempt is a fresh request.
  int attempt = 1;
};

// ---------------------------------------------------------------------------
// Journal: append-only file of length-prefixed JSON records,
//   "<decimal byte length>\n<json>\n"
// one per exchange, keyed by the request content hash.

struct JournalEntry {
  std::string key;
  std::string request_json;
  std::string response_json;
};

class Journal {
 public:
  explicit Journal(std::string path);

  void append(const JournalEntry& entry);
  static std::vector<JournalEntry> read_all(const std::string& path);
  /// Errors: IoError, SchemaMismatch on a truncated or malformed record.
  static std::map<std::string, JournalEntry> index(const std::string& path);

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// HTTP transport used by the remote backend; injectable for tests.

struct HttpResponse {
  int status = 0;  // 0 = transport failure
  std::string body;
  bool timed_out = false;
  std::string error;
};

using HttpPost = std::function<HttpResponse(const std::string& url, const std::string& body,
                                            const std::map<std::string, std::string>& headers,
                                            std::chrono::milliseconds timeout)>;

/// Default transport backed by cpp-httplib (http and https).
HttpPost default_http_post();

/// OpenAI-style chat completion request body for a prompt.
std::string remote_request_body(const Prompt& prompt, const RemoteBackend& backend);

// ---------------------------------------------------------------------------

class Gateway {
 public:
  struct Counters {
    std::uint64_t requests = 0;             // complete() calls
    std::uint64_t generation_requests = 0;  // template_id starting with "generation"
    std::uint64_t extraction_requests = 0;
    std::uint64_t backend_attempts = 0;     // includes retries
    std::uint64_t failures = 0;
    int inflight = 0;
    int peak_inflight = 0;
  };

  explicit Gateway(GatewayConfig config, const RoomLexicon& lexicon = RoomLexicon::builtin(),
                   const ActionSynonyms& actions = ActionSynonyms::builtin(), HttpPost transport = {});
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Safe for concurrent callers; at most max_inflight requests are
  /// outstanding at once. Errors: BackendTimeout, BackendRejected,
  /// RetriesExhausted (each carrying the attempt count).
  Completion complete(const Prompt& prompt, const RequestOptions& options = {});

  Counters counters() const;
  const GatewayConfig& config() const { return config_; }
  /// "mock-faithful", "mock-lossy", "remote:<model>" or "replay".
  std::string backend_id() const;

  /// Content hash identifying a request (prompt + attempt + backend).
  std::string request_key(const Prompt& prompt, const RequestOptions& options) const;

 private:
  struct Impl;
  GatewayConfig config_;
  std::unique_ptr<Impl> impl_;
};

// Deterministic stand-ins for the LMM. Exposed separately so tests can use the
// renderers as oracles.

/// Faithful rendering of the route in a generation prompt (its triplet block
/// and granularity). Error(PreconditionViolated) if the prompt carries no
/// parsable route.
std::string mock_render_generation(const Prompt& prompt);

/// "(room, action)" lines for the instruction embedded in an extraction
/// prompt, paired by proximity. Independent from the verifier's extractor.
std::string mock_answer_extraction(const Prompt& prompt, const RoomLexicon& lexicon,
                                   const ActionSynonyms& actions);

struct LossyOutcome {
  std::string text;
  std::vector<Corruption> corruptions;
};

/// Applies the lossy mock's corruption process to a generation prompt using
/// the given random stream.
LossyOutcome mock_render_lossy(const Prompt& prompt, const MockLossyBackend& spec, std::uint64_t stream,
                               const RoomLexicon& lexicon);

/// Fixed list of noise fragments the lossy mock may inject.
const std::vector<std::string>& mock_noise_fragments();

}  // namespace vlnpairs

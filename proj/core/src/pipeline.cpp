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

#include "vlnpairs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <set>
#include <thread>

#include "json_codec.hpp"
#include "vlnpairs/frame_store.hpp"
#include "vlnpairs/grounding.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

using codec::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

// Rejects keys outside `allowed` so typos fail loudly.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      config_error(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string rate(double r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.3f", r);
  return buf;
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

std::string backend_name(const BackendSpec& b) {
  switch (b.index()) {
    case 0: return "remote";
    case 1: return "mock-faithful";
    case 2: return "mock-lossy";
    default: return "replay";
  }
}

json backend_to_json(const BackendSpec& b) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RemoteBackend>) {
          return {{"kind", "remote"},
                  {"endpoint", s.endpoint},
                  {"model", s.model},
                  {"credential_env", s.credential_env},
                  {"temperature", s.temperature}};
        } else if constexpr (std::is_same_v<T, MockFaithfulBackend>) {
          return {{"kind", "mock-faithful"}, {"seed", s.seed}};
        } else if constexpr (std::is_same_v<T, MockLossyBackend>) {
          return {{"kind", "mock-lossy"}, {"seed", s.seed}, {"swap_prob", s.swap_prob}, {"noise_prob", s.noise_prob}};
        } else {
          return {{"kind", "replay"}, {"journal_path", s.journal_path}};
        }
      },
      b);
}

BackendSpec backend_from_json(const json& j, const std::string& base) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "remote") {
    check_keys(j, "gateway.backend", {"kind", "endpoint", "model", "credential_env", "temperature"});
    RemoteBackend r;
    read_opt(j, "endpoint", r.endpoint);
    read_opt(j, "model", r.model);
    read_opt(j, "credential_env", r.credential_env);
    read_opt(j, "temperature", r.temperature);
    return r;
  }
  if (kind == "mock-faithful") {
    check_keys(j, "gateway.backend", {"kind", "seed"});
    MockFaithfulBackend m;
    read_opt(j, "seed", m.seed);
    return m;
  }
  if (kind == "mock-lossy") {
    check_keys(j, "gateway.backend", {"kind", "seed", "swap_prob", "noise_prob"});
    MockLossyBackend m;
    read_opt(j, "seed", m.seed);
    read_opt(j, "swap_prob", m.swap_prob);
    read_opt(j, "noise_prob", m.noise_prob);
    return m;
  }
  if (kind == "replay") {
    check_keys(j, "gateway.backend", {"kind", "journal_path"});
    ReplayBackend r;
    read_opt(j, "journal_path", r.journal_path);
    r.journal_path = resolve(base, r.journal_path);
    return r;
  }
  config_error("gateway.backend: unknown kind '" + kind + "'");
}

ExtractorKind extractor_from_name(const std::string& name) {
  if (name == to_string(ExtractorKind::LMM)) return ExtractorKind::LMM;
  if (name == to_string(ExtractorKind::RuleBased)) return ExtractorKind::RuleBased;
  config_error("verify.extractor_order: unknown extractor '" + name + "'");
}

void require_input(const std::string& producer, const std::string& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::ConfigError,
                "needs the output of stage '" + producer + "', but " + path + " does not exist");
  }
}

std::vector<std::string> files_under(const std::string& path) {
  std::vector<std::string> out;
  if (fs::is_regular_file(path)) {
    out.push_back(path);
  } else if (fs::is_directory(path)) {
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) out.push_back(e.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <typename F>
StageReport run_stage(const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(ErrorCode::PipelineError, e.what()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

PipelineConfig PipelineConfig::parse(const std::string& text, const std::string& base_dir) {
  PipelineConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    check_keys(j, "config",
               {"seed", "jobs", "granularities", "sampler", "grounding", "gateway", "verify", "pretext", "paths",
                "split"});
    read_opt(j, "jobs", c.jobs);
    if (j.contains("granularities")) {
      c.granularities.clear();
      for (const auto& g : j.at("granularities")) {
        auto parsed = granularity_from_name(g.get<std::string>());
        if (!parsed) config_error("granularities: unknown granularity '" + g.get<std::string>() + "'");
        c.granularities.push_back(*parsed);
      }
    }
    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      check_keys(s, "sampler",
                 {"confidence_threshold", "min_rooms", "max_rooms", "max_transitions_between", "trajectories_per_video"});
      read_opt(s, "confidence_threshold", c.sampler.confidence_threshold);
      read_opt(s, "min_rooms", c.sampler.min_rooms);
      read_opt(s, "max_rooms", c.sampler.max_rooms);
      read_opt(s, "max_transitions_between", c.sampler.max_transitions_between);
      read_opt(s, "trajectories_per_video", c.sampler.trajectories_per_video);
    }
    if (j.contains("grounding")) {
      check_keys(j.at("grounding"), "grounding", {"max_inflight"});
      read_opt(j.at("grounding"), "max_inflight", c.grounding_inflight);
    }
    if (j.contains("gateway")) {
      const auto& g = j.at("gateway");
      check_keys(g, "gateway",
                 {"backend", "max_inflight", "request_timeout_s", "retry_limit", "initial_backoff_ms",
                  "requests_per_second", "journal_path"});
      if (g.contains("backend")) c.gateway.backend = backend_from_json(g.at("backend"), base_dir);
      read_opt(g, "max_inflight", c.gateway.max_inflight);
      read_opt(g, "request_timeout_s", c.gateway.request_timeout_s);
      read_opt(g, "retry_limit", c.gateway.retry_limit);
      if (g.contains("initial_backoff_ms")) {
        c.gateway.initial_backoff = std::chrono::milliseconds(g.at("initial_backoff_ms").get<std::int64_t>());
      }
      read_opt(g, "requests_per_second", c.gateway.requests_per_second);
      read_opt(g, "journal_path", c.gateway.journal_path);
    }
    if (j.contains("verify")) {
      const auto& v = j.at("verify");
      check_keys(v, "verify", {"max_attempts", "extractor_order", "check_destination"});
      read_opt(v, "max_attempts", c.verify.max_attempts);
      read_opt(v, "check_destination", c.verify.check_destination);
      if (v.contains("extractor_order")) {
        c.verify.extractor_order.clear();
        for (const auto& e : v.at("extractor_order")) c.verify.extractor_order.push_back(extractor_from_name(e));
      }
    }
    if (j.contains("pretext")) {
      const auto& p = j.at("pretext");
      check_keys(p, "pretext", {"regions_per_node", "feature_dim", "mask_prob", "pr_candidates"});
      read_opt(p, "regions_per_node", c.pretext.regions_per_node);
      read_opt(p, "feature_dim", c.pretext.feature_dim);
      read_opt(p, "mask_prob", c.pretext.mask_prob);
      read_opt(p, "pr_candidates", c.pretext.pr_candidates);
    }
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      check_keys(p, "paths",
                 {"videos", "stub_labels", "stub_actions", "adapter_url", "rooms_lexicon", "action_synonyms",
                  "cleanup_rules", "templates_dir", "out_dir"});
      read_opt(p, "videos", c.paths.videos);
      for (auto& v : c.paths.videos) v = resolve(base_dir, v);
      for (auto [key, field] : {std::pair{"stub_labels", &c.paths.stub_labels},
                                std::pair{"stub_actions", &c.paths.stub_actions},
                                std::pair{"rooms_lexicon", &c.paths.rooms_lexicon},
                                std::pair{"action_synonyms", &c.paths.action_synonyms},
                                std::pair{"cleanup_rules", &c.paths.cleanup_rules},
                                std::pair{"templates_dir", &c.paths.templates_dir}}) {
        read_opt(p, key, *field);
        *field = resolve(base_dir, *field);
      }
      read_opt(p, "adapter_url", c.paths.adapter_url);
      read_opt(p, "out_dir", c.paths.out_dir);
    }
    if (j.contains("split")) {
      check_keys(j.at("split"), "split", {"train_videos", "val_videos"});
      read_opt(j.at("split"), "train_videos", c.split.train_videos);
      read_opt(j.at("split"), "val_videos", c.split.val_videos);
    }
    std::uint64_t seed = 0;
    read_opt(j, "seed", seed);
    c.set_seed(seed);
  } catch (const json::exception& e) {
    config_error(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  if (!fs::exists(path)) config_error("config file " + path + " does not exist");
  const auto base = fs::path(path).parent_path().string();
  auto c = parse(read_file(path), base.empty() ? "." : base);
  c.validate();
  return c;
}

void PipelineConfig::set_seed(std::uint64_t s) {
  seed = s;
  sampler.seed = s;
  pretext.seed = s;
  if (auto* m = std::get_if<MockFaithfulBackend>(&gateway.backend)) m->seed = s;
  if (auto* m = std::get_if<MockLossyBackend>(&gateway.backend)) m->seed = s;
}

std::string PipelineConfig::to_json() const {
  json grans = json::array();
  for (auto g : granularities) grans.push_back(to_string(g));
  json order = json::array();
  for (auto e : verify.extractor_order) order.push_back(to_string(e));
  json j{
      {"seed", seed},
      {"jobs", jobs},
      {"granularities", grans},
      {"sampler",
       {{"confidence_threshold", sampler.confidence_threshold},
        {"min_rooms", sampler.min_rooms},
        {"max_rooms", sampler.max_rooms},
        {"max_transitions_between", sampler.max_transitions_between},
        {"trajectories_per_video", sampler.trajectories_per_video}}},
      {"grounding", {{"max_inflight", grounding_inflight}}},
      {"gateway",
       {{"backend", backend_to_json(gateway.backend)},
        {"max_inflight", gateway.max_inflight},
        {"request_timeout_s", gateway.request_timeout_s},
        {"retry_limit", gateway.retry_limit},
        {"initial_backoff_ms", gateway.initial_backoff.count()},
        {"requests_per_second", gateway.requests_per_second},
        {"journal_path", gateway.journal_path}}},
      {"verify",
       {{"max_attempts", verify.max_attempts},
        {"extractor_order", order},
        {"check_destination", verify.check_destination}}},
      {"pretext",
       {{"regions_per_node", pretext.regions_per_node},
        {"feature_dim", pretext.feature_dim},
        {"mask_prob", pretext.mask_prob},
        {"pr_candidates", pretext.pr_candidates}}},
      {"paths",
       {{"videos", paths.videos},
        {"stub_labels", paths.stub_labels},
        {"stub_actions", paths.stub_actions},
        {"adapter_url", paths.adapter_url},
        {"rooms_lexicon", paths.rooms_lexicon},
        {"action_synonyms", paths.action_synonyms},
        {"cleanup_rules", paths.cleanup_rules},
        {"templates_dir", paths.templates_dir},
        {"out_dir", paths.out_dir}}},
      {"split", {{"train_videos", split.train_videos}, {"val_videos", split.val_videos}}}};
  return j.dump(2);
}

std::string PipelineConfig::hash() const {
  // The output location does not affect the outputs.
  PipelineConfig c = *this;
  c.paths.out_dir.clear();
  return sha256_hex(c.to_json()).substr(0, 16);
}

void PipelineConfig::validate() const {
  sampler.validate();
  gateway.validate();
  verify.validate();
  pretext.validate();
  if (jobs < 1) config_error("jobs must be >= 1");
  if (grounding_inflight < 1) config_error("grounding.max_inflight must be >= 1");
  if (granularities.empty()) config_error("granularities must not be empty");
  for (const auto& v : paths.videos) {
    if (!fs::exists(fs::path(v) / "index.txt")) config_error("paths.videos: " + v + "/index.txt does not exist");
  }
  for (const auto* p : {&paths.stub_labels, &paths.stub_actions, &paths.rooms_lexicon, &paths.action_synonyms,
                        &paths.cleanup_rules, &paths.templates_dir}) {
    if (!p->empty() && !fs::exists(*p)) config_error("path " + *p + " does not exist");
  }
  if (const auto* r = std::get_if<ReplayBackend>(&gateway.backend); r && !fs::exists(r->journal_path)) {
    config_error("replay journal " + r->journal_path + " does not exist");
  }
  if (paths.out_dir.empty()) config_error("paths.out_dir must not be empty");
  std::set<std::string> train(split.train_videos.begin(), split.train_videos.end());
  for (const auto& v : split.val_videos) {
    if (train.count(v)) config_error("split: video '" + v + "' is in both train and val");
  }
}

BackendSpec backend_from_name(const std::string& name, const BackendSpec& current) {
  if (name == backend_name(current)) return current;
  std::uint64_t seed = 0;
  if (const auto* m = std::get_if<MockFaithfulBackend>(&current)) seed = m->seed;
  if (const auto* m = std::get_if<MockLossyBackend>(&current)) seed = m->seed;
  if (name == "mock-faithful") return MockFaithfulBackend{seed};
  if (name == "mock-lossy") return MockLossyBackend{seed, 0.3, 0.3};
  if (name == "remote") return RemoteBackend{};
  if (name == "replay") return ReplayBackend{};
  config_error("unknown backend '" + name + "' (expected mock-faithful, mock-lossy, remote or replay)");
}

StagePaths StagePaths::under(const std::string& out_dir) {
  const fs::path base(out_dir);
  return {(base / "trajectories.jsonl").string(), (base / "dataset").string(), (base / "pretext").string(),
          (base / "export" / "r2r.json").string(),  (base / "stats.json").string(), (base / "run_record.json").string()};
}

// ---------------------------------------------------------------------------
// Pipeline

struct Pipeline::Context {
  std::optional<RoomLexicon> lexicon;
  std::optional<ActionSynonyms> actions;
  std::optional<TemplateSet> templates;
  std::optional<CleanupRuleSet> rules;
  DirectoryImageSource images;
  std::vector<VideoFrames> videos;
  bool videos_loaded = false;
  std::unique_ptr<Gateway> gateway;

  VerifierContext verifier() const { return {&*lexicon, &*actions, &*templates, &*rules, &images}; }
};

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)), paths_(StagePaths::under(config_.paths.out_dir)), ctx_(std::make_unique<Context>()) {
  const auto& p = config_.paths;
  ctx_->lexicon.emplace(p.rooms_lexicon.empty() ? RoomLexicon::builtin() : RoomLexicon::load(p.rooms_lexicon));
  ctx_->actions.emplace(p.action_synonyms.empty() ? ActionSynonyms::builtin() : ActionSynonyms::load(p.action_synonyms));
  ctx_->templates.emplace(p.templates_dir.empty() ? TemplateSet::builtin() : TemplateSet::load_directory(p.templates_dir));
  ctx_->rules.emplace(p.cleanup_rules.empty() ? CleanupRuleSet::builtin() : CleanupRuleSet::load(p.cleanup_rules));
}

Pipeline::~Pipeline() = default;

Pipeline::Context& Pipeline::context() {
  if (!ctx_->videos_loaded) {
    for (const auto& dir : config_.paths.videos) {
      ctx_->videos.push_back(load_video_directory(dir));
      ctx_->images.add(ctx_->videos.back());
    }
    ctx_->videos_loaded = true;
  }
  return *ctx_;
}

Gateway& Pipeline::gateway() {
  if (!ctx_->gateway) {
    GatewayConfig g = config_.gateway;
    if (!g.journal_path.empty() && fs::path(g.journal_path).is_relative()) {
      g.journal_path = (fs::path(config_.paths.out_dir) / g.journal_path).string();
      fs::create_directories(fs::path(g.journal_path).parent_path());
    }
    ctx_->gateway = std::make_unique<Gateway>(std::move(g), *ctx_->lexicon, *ctx_->actions);
  }
  return *ctx_->gateway;
}

StageReport Pipeline::sample() {
  return run_stage("sample", [&] {
    auto& ctx = context();
    if (ctx.videos.empty()) config_error("sample: paths.videos is empty");

    std::unique_ptr<LabelClient> labeler;
    std::unique_ptr<ActionClient> actor;
    std::unique_ptr<AdapterClient> adapter;
    if (!config_.paths.adapter_url.empty()) {
      adapter = std::make_unique<AdapterClient>(config_.paths.adapter_url, ctx.images, RetryPolicy{}, *ctx.lexicon);
    } else {
      std::map<std::string, RoomLabel> table;
      if (!config_.paths.stub_labels.empty()) {
        table = StubLabelClient::parse_table(read_file(config_.paths.stub_labels), *ctx.lexicon);
      }
      labeler = std::make_unique<StubLabelClient>(std::move(table), config_.seed, *ctx.lexicon);
      StubActionClient::Script script;
      if (!config_.paths.stub_actions.empty()) script = StubActionClient::parse_script(read_file(config_.paths.stub_actions));
      actor = std::make_unique<StubActionClient>(std::move(script), config_.seed);
    }
    LabelClient& raw_labeler = adapter ? static_cast<LabelClient&>(*adapter) : *labeler;
    ActionClient& action_client = adapter ? static_cast<ActionClient&>(*adapter) : *actor;
    CachingLabelClient cached(raw_labeler);
    const GroundingOptions opts{config_.grounding_inflight, config_.sampler.limits()};

    std::vector<Trajectory> out;
    StageReport report{"sample", {paths_.trajectories}, {}};
    for (const auto& video : ctx.videos) {
      const auto annotated = annotate_frames(video.frames, cached, config_.sampler.confidence_threshold);
      auto sampled = sample_many(annotated, config_.sampler);
      for (const auto& t : sampled) out.push_back(ground_actions(label_nodes(t, cached, opts), action_client, opts));
      report.notes.push_back(video.video_id + ": " + std::to_string(video.frames.size()) + " frames, " +
                             std::to_string(sampled.size()) + " trajectories");
    }
    write_trajectories(out, paths_.trajectories);
    return report;
  });
}

StageReport Pipeline::generate() {
  return run_stage("generate", [&] {
    require_input("sample", paths_.trajectories);
    const auto trajectories = read_trajectories(paths_.trajectories);
    auto& ctx = context();
    auto& gw = gateway();
    const auto vctx = ctx.verifier();

    struct Task {
      const Trajectory* traj;
      Granularity granularity;
    };
    std::vector<Task> tasks;
    for (const auto& t : trajectories) {
      for (auto g : config_.granularities) tasks.push_back({&t, g});
    }
    std::vector<std::optional<PathInstructionPair>> results(tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
      for (std::size_t i = next++; i < tasks.size(); i = next++) {
        try {
          results[i] = generate_verified(*tasks[i].traj, tasks[i].granularity, gw, config_.verify, vctx);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = tasks.size();
        }
      }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config_.jobs), std::max<std::size_t>(tasks.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<PathInstructionPair> pairs;
    for (auto& r : results) pairs.push_back(std::move(*r));
    const auto manifest = write_dataset(pairs, paths_.dataset, config_.split);
    const auto c = gw.counters();
    return StageReport{"generate",
                       {paths_.dataset},
                       {std::to_string(manifest.total_pairs) + " pairs, pass rate " + rate(manifest.pass_rate),
                        std::to_string(c.requests) + " gateway requests (" + std::to_string(c.generation_requests) +
                            " generation, " + std::to_string(c.extraction_requests) + " extraction)"}};
  });
}

StageReport Pipeline::verify() {
  return run_stage("verify", [&] {
    require_input("generate", (fs::path(paths_.dataset) / "manifest.json").string());
    auto pairs = read_dataset(paths_.dataset);
    auto& ctx = context();
    auto& gw = gateway();
    const auto vctx = ctx.verifier();
    int changed = 0;
    for (auto& p : pairs) {
      auto record = verify_instruction(p.trajectory, p.instruction.text, &gw, config_.verify, vctx);
      record.attempts_used = p.verification.attempts_used;
      record.template_version = p.verification.template_version;
      const auto status = record.verdict.passed() ? PairStatus::Verified : PairStatus::Rejected;
      if (status != p.status) ++changed;
      p.verification = std::move(record);
      p.status = status;
    }
    const auto manifest = write_dataset(pairs, paths_.dataset, config_.split);
    return StageReport{"verify",
                       {paths_.dataset},
                       {std::to_string(pairs.size()) + " pairs re-verified, " + std::to_string(changed) +
                        " changed status, pass rate " + rate(manifest.pass_rate)}};
  });
}

StageReport Pipeline::pretext() {
  return run_stage("pretext", [&] {
    require_input("generate", (fs::path(paths_.dataset) / "manifest.json").string());
    const auto pairs = read_dataset(paths_.dataset);
    StubFeatureProvider features(config_.pretext.seed);
    WordTokenizer tokenizer;
    PretextBuildStats stats;
    const auto examples = build_pretext_examples(pairs, features, tokenizer, config_.pretext, &stats);
    const auto m = write_pretext_dataset(examples, paths_.pretext, config_.pretext, stats);
    StageReport report{"pretext", {paths_.pretext}, {}};
    std::string counts;
    for (const auto& [k, v] : m.counts) counts += (counts.empty() ? "" : ", ") + k + "=" + std::to_string(v);
    report.notes.push_back(std::to_string(examples.size()) + " examples (" + counts + ")");
    if (stats.skipped_pr || stats.skipped_pij) {
      report.notes.push_back("skipped PR=" + std::to_string(stats.skipped_pr) +
                             " PIJ=" + std::to_string(stats.skipped_pij));
    }
    return report;
  });
}

StageReport Pipeline::export_r2r() {
  return run_stage("export", [&] {
    require_input("generate", (fs::path(paths_.dataset) / "manifest.json").string());
    auto pairs = read_dataset(paths_.dataset);
    std::erase_if(pairs, [](const auto& p) { return p.status != PairStatus::Verified; });
    const auto records = export_r2r_style(pairs, paths_.r2r_export);
    return StageReport{"export", {paths_.r2r_export}, {std::to_string(records.size()) + " verified pairs exported"}};
  });
}

StageReport Pipeline::stats() {
  return run_stage("stats", [&] {
    require_input("generate", (fs::path(paths_.dataset) / "manifest.json").string());
    const auto pairs = read_dataset(paths_.dataset);
    const auto m = vlnpairs::stats(pairs, config_.split);
    write_file(paths_.stats, manifest_to_json(m));
    std::string statuses;
    for (const auto& [k, v] : m.by_status) statuses += ", " + k + "=" + std::to_string(v);
    return StageReport{"stats",
                       {paths_.stats},
                       {std::to_string(m.total_pairs) + " pairs" + statuses + ", pass rate " + rate(m.pass_rate)}};
  });
}

std::vector<StageReport> Pipeline::e2e() {
  std::vector<StageReport> reports;
  reports.push_back(sample());
  reports.push_back(generate());
  reports.push_back(pretext());
  reports.push_back(export_r2r());
  reports.push_back(stats());
  return reports;
}

std::vector<std::string> Pipeline::plan(const std::string& stage) const {
  const auto& c = config_;
  const std::string backend = backend_name(c.gateway.backend);
  std::vector<std::string> out;
  auto sample_plan = [&] {
    out.push_back("sample: " + std::to_string(c.paths.videos.size()) + " video(s), up to " +
                  std::to_string(c.sampler.trajectories_per_video) + " trajectories each, rooms in [" +
                  std::to_string(c.sampler.min_rooms) + ", " + std::to_string(c.sampler.max_rooms) + "] -> " +
                  paths_.trajectories);
  };
  auto generate_plan = [&] {
    out.push_back("generate: " + std::to_string(c.granularities.size()) + " granularity(ies) per trajectory via " +
                  backend + ", up to " + std::to_string(c.verify.max_attempts) + " attempts, " +
                  std::to_string(c.jobs) + " job(s) -> " + paths_.dataset);
  };
  auto pretext_plan = [&] {
    out.push_back("pretext: MLM, MVM, PIJ and PR examples (n=" + std::to_string(c.pretext.regions_per_node) +
                  ", d=" + std::to_string(c.pretext.feature_dim) + ") -> " + paths_.pretext);
  };
  auto export_plan = [&] { out.push_back("export: verified pairs -> " + paths_.r2r_export); };
  auto stats_plan = [&] { out.push_back("stats: manifest -> " + paths_.stats); };
  if (stage == "sample") sample_plan();
  else if (stage == "generate") generate_plan();
  else if (stage == "verify") out.push_back("verify: re-check instructions in " + paths_.dataset + " via " + backend);
  else if (stage == "pretext") pretext_plan();
  else if (stage == "export") export_plan();
  else if (stage == "stats") stats_plan();
  else if (stage == "e2e") {
    sample_plan();
    generate_plan();
    pretext_plan();
    export_plan();
    stats_plan();
  } else {
    config_error("unknown stage '" + stage + "'");
  }
  return out;
}

void Pipeline::write_run_record(const std::vector<StageReport>& reports) const {
  json stages = json::array();
  json outputs = json::object();
  const fs::path base(config_.paths.out_dir);
  for (const auto& r : reports) {
    stages.push_back(r.stage);
    for (const auto& o : r.outputs) {
      for (const auto& f : files_under(o)) {
        outputs[fs::path(f).lexically_relative(base).generic_string()] = sha256_hex(read_file(f));
      }
    }
  }
  const json record{{"stages", stages},
                    {"config_hash", config_.hash()},
                    {"seeds", {{"pipeline", config_.seed}, {"sampler", config_.sampler.seed}, {"pretext", config_.pretext.seed}}},
                    {"backend", backend_name(config_.gateway.backend)},
                    {"template_versions",
                     {{"generation", ctx_->templates->generation_version()},
                      {"extraction", ctx_->templates->extraction_version()}}},
                    {"lexicon_versions", {{"rooms", ctx_->lexicon->version()}, {"actions", ctx_->actions->version()}}},
                    {"cleanup_rules_version", ctx_->rules->version()},
                    {"config", [&] {
                       auto j = json::parse(config_.to_json());
                       j["paths"].erase("out_dir");
                       return j;
                     }()},
                    {"outputs", outputs}};
  fs::create_directories(base);
  write_file(paths_.run_record, record.dump(2) + "\n");
}

}  // namespace vlnpairs

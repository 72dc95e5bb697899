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
#include <memory>
#include <string>
#include <vector>

#include "vlnpairs/dataset_io.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/gateway.hpp"
#include "vlnpairs/pretext.hpp"
#include "vlnpairs/sampler.hpp"
#include "vlnpairs/verifier.hpp"

namespace vlnpairs {

// Input paths are resolved against the config file's directory; out_dir is
// resolved against the working directory.
struct PipelinePaths {
  std::vector<std::string> videos;  // frame directories, each with index.txt
  std::string stub_labels;          // label table for the stub labeler
  std::string stub_actions;         // action script for the stub action model
  std::string adapter_url;          // when set, the adapter service replaces both stubs
  std::string rooms_lexicon;        // empty = built-in
  std::string action_synonyms;      // empty = built-in
  std::string cleanup_rules;        // empty = built-in
  std::string templates_dir;        // empty = built-in
  std::string out_dir = "out";
};

struct PipelineConfig {
  std::uint64_t seed = 0;  // applied to the sampler, stub adapters, mock backends and pretext builder
  SamplerConfig sampler;
  GatewayConfig gateway;
  VerifyConfig verify;
  PretextConfig pretext;
  PipelinePaths paths;
  DatasetSplit split;
  std::vector<Granularity> granularities = {Granularity::Coarse, Granularity::Fine};
  int jobs = 4;
  int grounding_inflight = 4;

  /// Parses the JSON config; relative input paths are resolved against
  /// `base_dir`. Unknown keys are rejected. Errors: ConfigError.
  static PipelineConfig parse(const std::string& text, const std::string& base_dir = ".");
  /// parse() of the file, then validate(). Errors: ConfigError, IoError.
  static PipelineConfig load(const std::string& path);

  /// Canonical JSON form.
  std::string to_json() const;
  /// Hash of the canonical form without out_dir.
  std::string hash() const;

  /// Overrides every component seed.
  void set_seed(std::uint64_t seed);
  /// Bounds and existence of every referenced input path. Errors: ConfigError.
  void validate() const;
};

/// Parses "mock-faithful", "mock-lossy", "remote" or "replay", keeping the
/// configured parameters when the kind is unchanged. Errors: ConfigError.
BackendSpec backend_from_name(const std::string& name, const BackendSpec& current);

// Stage failure carrying the stage name for operator-facing reports.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.detail(), cause.attempts()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Output layout under out_dir.
struct StagePaths {
  std::string trajectories;  // sample
  std::string dataset;       // generate / verify
  std::string pretext;       // pretext
  std::string r2r_export;    // export
  std::string stats;         // stats
  std::string run_record;

  static StagePaths under(const std::string& out_dir);
};

struct StageReport {
  std::string stage;
  std::vector<std::string> outputs;
  std::vector<std::string> notes;  // one-line summaries
};

// Runs pipeline stages. Each stage reads the previous stage's files, so any
// stage can be re-run on its own; a missing input is a ConfigError naming
// the stage that produces it. Failures surface as StageError.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();

  StageReport sample();
  StageReport generate();
  StageReport verify();
  StageReport pretext();
  StageReport export_r2r();
  StageReport stats();
  std::vector<StageReport> e2e();

  /// Planned work for a stage without running it.
  std::vector<std::string> plan(const std::string& stage) const;

  /// Writes run_record.json: config hash, seeds, template, lexicon and rule
  /// versions, backend id and a hash of every output file.
  void write_run_record(const std::vector<StageReport>& reports) const;

  const PipelineConfig& config() const { return config_; }
  const StagePaths& paths() const { return paths_; }

 private:
  struct Context;
  PipelineConfig config_;
  StagePaths paths_;
  std::unique_ptr<Context> ctx_;

  Context& context();
  Gateway& gateway();
};

inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages = {"sample", "generate", "verify", "pretext",
                                                  "export", "stats",    "e2e"};
  return stages;
}

}  // namespace vlnpairs

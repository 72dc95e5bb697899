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

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>

#include "vlnpairs/pipeline.hpp"

namespace {

using vlnpairs::Pipeline;
using vlnpairs::PipelineConfig;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::optional<int> jobs;
  std::string out;
  bool dry_run = false;
};

void report_error(const std::string& stage, const vlnpairs::Error& e) {
  std::string message = e.detail();
  if (message.rfind(stage + ": ", 0) == 0) message.erase(0, stage.size() + 2);
  nlohmann::ordered_json j{{"error", vlnpairs::to_string(e.code())}, {"stage", stage}, {"message", message}};
  if (e.attempts() > 0) j["attempts"] = e.attempts();
  std::cerr << j.dump() << "\n";
}

int run(const std::string& stage, const Options& opts) {
  PipelineConfig config;
  try {
    config = PipelineConfig::load(opts.config);
    if (opts.seed) config.set_seed(*opts.seed);
    if (!opts.backend.empty()) {
      config.gateway.backend = vlnpairs::backend_from_name(opts.backend, config.gateway.backend);
      config.set_seed(config.seed);
    }
    if (opts.jobs) config.jobs = *opts.jobs;
    if (!opts.out.empty()) config.paths.out_dir = opts.out;
    config.validate();
  } catch (const vlnpairs::Error& e) {
    report_error("config", e);
    return 2;
  }

  try {
    Pipeline pipeline(config);
    if (opts.dry_run) {
      for (const auto& line : pipeline.plan(stage)) std::cout << line << "\n";
      return 0;
    }
    std::vector<vlnpairs::StageReport> reports;
    if (stage == "sample") reports.push_back(pipeline.sample());
    else if (stage == "generate") reports.push_back(pipeline.generate());
    else if (stage == "verify") reports.push_back(pipeline.verify());
    else if (stage == "pretext") reports.push_back(pipeline.pretext());
    else if (stage == "export") reports.push_back(pipeline.export_r2r());
    else if (stage == "stats") reports.push_back(pipeline.stats());
    else reports = pipeline.e2e();
    pipeline.write_run_record(reports);
    for (const auto& r : reports) {
      for (const auto& note : r.notes) std::cout << r.stage << ": " << note << "\n";
    }
    return 0;
  } catch (const vlnpairs::StageError& e) {
    report_error(e.stage(), e);
  } catch (const vlnpairs::Error& e) {
    report_error(stage, e);
  } catch (const std::exception& e) {
    report_error(stage, vlnpairs::Error(vlnpairs::ErrorCode::PipelineError, e.what()));
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build verified path-instruction datasets from indoor-tour video frames"};
  app.require_subcommand(1);
  Options opts;
  const std::map<std::string, std::string> descriptions = {
      {"sample", "Sample and ground trajectories from the configured videos"},
      {"generate", "Generate instructions and verify them against their trajectories"},
      {"verify", "Re-verify the instructions of an existing dataset"},
      {"pretext", "Build MLM, MVM, PIJ and PR examples from verified pairs"},
      {"export", "Export verified pairs in an R2R-style JSON layout"},
      {"stats", "Recompute dataset statistics"},
      {"e2e", "Run sample, generate, pretext, export and stats"}};
  for (const auto& stage : vlnpairs::pipeline_stages()) {
    auto* sub = app.add_subcommand(stage, descriptions.at(stage));
    sub->add_option("--config", opts.config, "Pipeline config file (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "Override every seed in the config");
    sub->add_option("--backend", opts.backend, "LMM backend")
        ->check(CLI::IsMember({"mock-faithful", "mock-lossy", "remote", "replay"}));
    sub->add_option("--jobs", opts.jobs, "Worker threads for generation")->check(CLI::PositiveNumber);
    sub->add_option("--out", opts.out, "Output directory (overrides paths.out_dir)");
    sub->add_flag("--dry-run", opts.dry_run, "Print the planned work and exit");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("cli", vlnpairs::Error(vlnpairs::ErrorCode::ConfigError, e.what()));
    return 2;
  }
  for (auto* sub : app.get_subcommands()) return run(sub->get_name(), opts);
  return 1;
}

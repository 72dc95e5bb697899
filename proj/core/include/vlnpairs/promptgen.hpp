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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vlnpairs/grounding.hpp"
#include "vlnpairs/types.hpp"

namespace vlnpairs {

class ImageSource;

struct ImageAttachment {
  std::string frame_key;
  std::string mime_type;
  std::string bytes;  // empty when the prompt was built without an image source

  friend bool operator==(const ImageAttachment&, const ImageAttachment&) = default;
};

struct Prompt {
  std::string system_text;
  std::string user_text;
  std::vector<ImageAttachment> images;
  std::string template_id;       // "generation/coarse", "generation/fine" or "extraction"
  std::string template_version;  // content hash of the template family

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

inline constexpr std::string_view kExtractionTemplateId = "extraction";

// The six prompt template files (see data/templates/README.md).
class TemplateSet {
 public:
  static const TemplateSet& builtin();
  /// Loads the template files from `directory`; Error(ConfigError) if one is
  /// missing or carries an unsupported placeholder.
  static TemplateSet load_directory(const std::string& directory);
  static TemplateSet from_texts(std::map<std::string, std::string> texts);

  const std::string& text(std::string_view name) const;
  const std::string& generation_version() const { return generation_version_; }
  const std::string& extraction_version() const { return extraction_version_; }

  static const std::vector<std::string>& file_names();

 private:
  std::map<std::string, std::string, std::less<>> texts_;
  std::string generation_version_;
  std::string extraction_version_;
};

/// Replaces every {{name}} token. Unknown tokens raise Error(ConfigError).
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& values);
/// Placeholder names used in `tpl`, in order of first appearance.
std::vector<std::string> template_placeholders(std::string_view tpl);

/// "(image#1, kitchen, Forward)" / "(image#2, None, None)", one per line.
std::string serialize_triplets(const std::vector<Triplet>& triplets);

struct ParsedTriplet {
  int image_number = 0;
  std::optional<std::string> room_type;
  std::vector<std::string> objects;
  std::optional<Action> action;

  friend bool operator==(const ParsedTriplet&, const ParsedTriplet&) = default;
};

/// Every triplet line found in `text`, in order. Lines that are not triplets
/// are skipped.
std::vector<ParsedTriplet> parse_triplet_block(std::string_view text);

// A room node seen from the instruction's point of view.
struct RouteStep {
  std::string room;
  std::vector<std::string> objects;
  Action action = Action::Forward;

  friend bool operator==(const RouteStep&, const RouteStep&) = default;
};

std::vector<RouteStep> route_steps(const std::vector<Triplet>& triplets);
std::vector<RouteStep> route_steps(const std::vector<ParsedTriplet>& triplets);

/// Canonical surface phrase for a moving action ("go straight", ...).
std::string_view action_phrase(Action a);

/// The reference rendering of a route:
///   "Start in the kitchen, go straight into the hallway, turn left, then stop in the bedroom."
/// Fine granularity adds each room's objects ("the kitchen with the stove").
/// Used for the format example embedded in generation prompts.
std::string render_reference_instruction(const std::vector<RouteStep>& steps, Granularity granularity);

/// Error(PreconditionViolated) if `traj` is not grounded. `images` may be null,
/// in which case attachments carry frame keys only.
Prompt build_generation_prompt(const Trajectory& traj, Granularity granularity,
                               const TemplateSet& templates = TemplateSet::builtin(),
                               const ImageSource* images = nullptr);

/// Error(EmptyInstruction) if the text is blank.
Prompt build_extraction_prompt(std::string_view instruction_text,
                               const TemplateSet& templates = TemplateSet::builtin());

/// The instruction text embedded in an extraction prompt.
std::optional<std::string> instruction_from_extraction_prompt(const Prompt& prompt);

}  // namespace vlnpairs

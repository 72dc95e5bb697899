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

#include "vlnpairs/promptgen.hpp"

#include <filesystem>
#include <regex>

#include "embedded_data.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/frame_store.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {
namespace {

const std::map<std::string, std::vector<std::string>>& required_placeholders() {
  static const std::map<std::string, std::vector<std::string>> req = {
      {"generation_system", {}},
      {"generation_user", {"task_definition", "triplets", "format_example"}},
      {"task_coarse", {}},
      {"task_fine", {}},
      {"extraction_system", {}},
      {"extraction_user", {"instruction"}},
  };
  return req;
}

std::string family_hash(const std::map<std::string, std::string, std::less<>>& texts,
                        std::initializer_list<std::string_view> names) {
  std::string blob;
  for (auto name : names) {
    const auto& t = texts.find(name)->second;
    blob += std::string(name) + "\n" + std::to_string(t.size()) + "\n" + t;
  }
  return sha256_hex(blob).substr(0, 12);
}

std::string mime_for(std::string_view bytes) {
  if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xff &&
      static_cast<unsigned char>(bytes[1]) == 0xd8) {
    return "image/jpeg";
  }
  if (bytes.size() >= 8 && bytes.substr(1, 3) == "PNG") return "image/png";
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '3')) {
    return "image/x-portable-pixmap";
  }
  return "application/octet-stream";
}

// Fixed miniature route used for the format example.
const std::vector<RouteStep>& example_route() {
  static const std::vector<RouteStep> route = {
      {"living room", {"sofa"}, Action::Forward},
      {"kitchen", {"stove", "sink"}, Action::TurnLeft},
      {"dining room", {"table"}, Action::Stop},
  };
  return route;
}

std::string room_phrase(const RouteStep& step, Granularity g) {
  std::string out = "the " + step.room;
  if (g == Granularity::Coarse || step.objects.empty()) return out;
  out += " with ";
  for (std::size_t i = 0; i < step.objects.size(); ++i) {
    if (i > 0) out += (i + 1 == step.objects.size()) ? " and " : ", ";
    out += "the " + step.objects[i];
  }
  return out;
}

}  // namespace

const std::vector<std::string>& TemplateSet::file_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, _] : required_placeholders()) v.push_back(name);
    return v;
  }();
  return names;
}

TemplateSet TemplateSet::from_texts(std::map<std::string, std::string> texts) {
  TemplateSet set;
  for (const auto& [name, required] : required_placeholders()) {
    auto it = texts.find(name);
    if (it == texts.end()) throw Error(ErrorCode::ConfigError, "missing prompt template '" + name + "'");
    auto used = template_placeholders(it->second);
    for (const auto& p : used) {
      if (std::find(required.begin(), required.end(), p) == required.end()) {
        throw Error(ErrorCode::ConfigError, "template '" + name + "' uses unsupported placeholder {{" + p + "}}");
      }
    }
    for (const auto& r : required) {
      if (std::find(used.begin(), used.end(), r) == used.end()) {
        throw Error(ErrorCode::ConfigError, "template '" + name + "' lacks placeholder {{" + r + "}}");
      }
    }
    set.texts_[name] = it->second;
  }
  set.generation_version_ =
      family_hash(set.texts_, {"generation_system", "generation_user", "task_coarse", "task_fine"});
  set.extraction_version_ = family_hash(set.texts_, {"extraction_system", "extraction_user"});
  return set;
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = [] {
    std::map<std::string, std::string> texts;
    for (const auto& [name, _] : required_placeholders()) texts[name] = std::string(embedded::template_text(name));
    return from_texts(std::move(texts));
  }();
  return set;
}

TemplateSet TemplateSet::load_directory(const std::string& directory) {
  std::map<std::string, std::string> texts;
  for (const auto& [name, _] : required_placeholders()) {
    auto path = std::filesystem::path(directory) / (name + ".txt");
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::ConfigError, "missing prompt template file " + path.string());
    }
    texts[name] = read_file(path.string());
  }
  return from_texts(std::move(texts));
}

const std::string& TemplateSet::text(std::string_view name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw Error(ErrorCode::ConfigError, "no template named " + std::string(name));
  return it->second;
}

std::vector<std::string> template_placeholders(std::string_view tpl) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = tpl.find("{{", pos)) != std::string_view::npos) {
    std::size_t end = tpl.find("}}", pos + 2);
    if (end == std::string_view::npos) break;
    std::string name = trim(tpl.substr(pos + 2, end - pos - 2));
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    pos = end + 2;
  }
  return out;
}

std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = tpl.find("{{", pos);
    std::size_t close = open == std::string_view::npos ? open : tpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    out.append(tpl.substr(pos, open - pos));
    std::string name = trim(tpl.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (it == values.end()) throw Error(ErrorCode::ConfigError, "no value for placeholder {{" + name + "}}");
    out += it->second;
    pos = close + 2;
  }
  return out;
}

std::string serialize_triplets(const std::vector<Triplet>& triplets) {
  std::string out;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    out += "(image#" + std::to_string(i + 1) + ", ";
    if (t.label) {
      out += serialize_label(*t.label) + ", " + std::string(to_string(*t.action));
    } else {
      out += "None, None";
    }
    out += ")\n";
  }
  return out;
}

std::vector<ParsedTriplet> parse_triplet_block(std::string_view text) {
  static const std::regex line_re(R"(^\s*\(image#(\d+),\s*(.+),\s*([A-Za-z]+)\)\s*$)");
  std::vector<ParsedTriplet> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    ParsedTriplet t;
    t.image_number = std::stoi(m[1].str());
    std::string label = trim(m[2].str());
    std::string action = m[3].str();
    if (label == "None" && action == "None") {
      out.push_back(std::move(t));
      continue;
    }
    auto parsed_action = action_from_name(action);
    if (!parsed_action) continue;
    t.action = parsed_action;
    std::size_t with = label.rfind(" with ");
    if (with == std::string::npos) {
      t.room_type = label;
    } else {
      t.room_type = trim(label.substr(with + 6));
      std::string objects = label.substr(0, with);
      std::size_t p = 0;
      while (true) {
        std::size_t comma = objects.find(", ", p);
        t.objects.push_back(trim(objects.substr(p, comma == std::string::npos ? std::string::npos : comma - p)));
        if (comma == std::string::npos) break;
        p = comma + 2;
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<RouteStep> route_steps(const std::vector<Triplet>& triplets) {
  std::vector<RouteStep> steps;
  for (const auto& t : triplets) {
    if (t.label && t.action) steps.push_back({t.label->room_type, t.label->objects, *t.action});
  }
  return steps;
}

std::vector<RouteStep> route_steps(const std::vector<ParsedTriplet>& triplets) {
  std::vector<RouteStep> steps;
  for (const auto& t : triplets) {
    if (t.room_type && t.action) steps.push_back({*t.room_type, t.objects, *t.action});
  }
  return steps;
}

std::string_view action_phrase(Action a) {
  switch (a) {
    case Action::Forward: return "go straight";
    case Action::TurnLeft: return "turn left";
    case Action::TurnRight: return "turn right";
    case Action::Stop: return "stop";
  }
  return "go straight";
}

std::string render_reference_instruction(const std::vector<RouteStep>& steps, Granularity granularity) {
  if (steps.size() < 2) {
    throw Error(ErrorCode::PreconditionViolated, "reference rendering needs at least two room nodes");
  }
  std::string out = "Start in " + room_phrase(steps.front(), granularity);
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    out += ", ";
    out += action_phrase(steps[i].action);
    if (i + 2 < steps.size()) out += " into " + room_phrase(steps[i + 1], granularity);
  }
  out += ", then stop in " + room_phrase(steps.back(), granularity) + ".";
  return out;
}

Prompt build_generation_prompt(const Trajectory& traj, Granularity granularity, const TemplateSet& templates,
                               const ImageSource* images) {
  if (!traj.is_grounded()) {
    throw Error(ErrorCode::PreconditionViolated, "build_generation_prompt: trajectory " + traj.id() +
                                                     " is not grounded");
  }
  const auto triplets = triplet_view(traj);
  Prompt p;
  p.template_id = granularity == Granularity::Coarse ? "generation/coarse" : "generation/fine";
  p.template_version = templates.generation_version();
  p.system_text = templates.text("generation_system");
  p.user_text = render_template(
      templates.text("generation_user"),
      {{"task_definition", trim(templates.text(granularity == Granularity::Coarse ? "task_coarse" : "task_fine"))},
       {"triplets", trim(serialize_triplets(triplets))},
       {"format_example", render_reference_instruction(example_route(), granularity)}});
  for (const auto& t : triplets) {
    ImageAttachment img{t.frame.key(), "application/octet-stream", {}};
    if (images) {
      img.bytes = images->read(t.frame);
      img.mime_type = mime_for(img.bytes);
    }
    p.images.push_back(std::move(img));
  }
  return p;
}

Prompt build_extraction_prompt(std::string_view instruction_text, const TemplateSet& templates) {
  if (trim(instruction_text).empty()) {
    throw Error(ErrorCode::EmptyInstruction, "extraction prompt needs a non-empty instruction");
  }
  Prompt p;
  p.template_id = std::string(kExtractionTemplateId);
  p.template_version = templates.extraction_version();
  p.system_text = templates.text("extraction_system");
  p.user_text = render_template(templates.text("extraction_user"), {{"instruction", std::string(instruction_text)}});
  return p;
}

std::optional<std::string> instruction_from_extraction_prompt(const Prompt& prompt) {
  static constexpr std::string_view kMarker = "Instruction:\n";
  std::size_t pos = prompt.user_text.find(kMarker);
  if (pos == std::string::npos) return std::nullopt;
  return trim(std::string_view(prompt.user_text).substr(pos + kMarker.size()));
}

}  // namespace vlnpairs

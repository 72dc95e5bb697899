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

#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "vlnpairs/error.hpp"
#include "vlnpairs/frame_store.hpp"
#include "vlnpairs/promptgen.hpp"

namespace vlnpairs {
namespace {

namespace fs = std::filesystem;

Trajectory sample_route() {
  return testing::make_trajectory({{"living room", {"sofa", "lamp"}, Action::Forward},
                                   {"kitchen", {}, Action::TurnLeft},
                                   {"bedroom", {"bed"}, Action::Stop}},
                                  1);
}

// Text between "Triplets:\n" and the next blank line.
std::string triplet_block(const std::string& user_text) {
  const auto start = user_text.find("Triplets:\n");
  EXPECT_NE(start, std::string::npos);
  const auto begin = start + 10;
  return user_text.substr(begin, user_text.find("\n\n", begin) - begin);
}

TEST(GenerationPrompt, TripletBlockFormat) {
  const auto p = build_generation_prompt(sample_route(), Granularity::Coarse);
  EXPECT_EQ(triplet_block(p.user_text),
            "(image#1, sofa, lamp with living room, Forward)\n"
            "(image#2, None, None)\n"
            "(image#3, kitchen, TurnLeft)\n"
            "(image#4, None, None)\n"
            "(image#5, bed with bedroom, Stop)");
  EXPECT_EQ(p.template_id, "generation/coarse");
  EXPECT_FALSE(p.system_text.empty());
}

TEST(GenerationPrompt, RequiredParts) {
  for (auto g : {Granularity::Coarse, Granularity::Fine}) {
    const auto p = build_generation_prompt(sample_route(), g);
    EXPECT_NE(p.user_text.find("beyond the labels provided"), std::string::npos);
    EXPECT_NE(p.user_text.find("Example output format:\nStart in the living room"), std::string::npos);
    EXPECT_NE(p.user_text.find(g == Granularity::Coarse ? "concise" : "detailed"), std::string::npos);
    EXPECT_EQ(p.user_text.find("{{"), std::string::npos);
  }
}

TEST(GenerationPrompt, GranularityChangesOnlyTaskAndExample) {
  const auto coarse = build_generation_prompt(sample_route(), Granularity::Coarse);
  const auto fine = build_generation_prompt(sample_route(), Granularity::Fine);
  EXPECT_EQ(triplet_block(coarse.user_text), triplet_block(fine.user_text));
  EXPECT_EQ(coarse.system_text, fine.system_text);
  EXPECT_EQ(coarse.images, fine.images);
  EXPECT_NE(coarse.user_text, fine.user_text);
  const auto& t = TemplateSet::builtin();
  EXPECT_NE(coarse.user_text.find(trim(t.text("task_coarse"))), std::string::npos);
  EXPECT_NE(fine.user_text.find(trim(t.text("task_fine"))), std::string::npos);
  EXPECT_EQ(coarse.user_text.find(trim(t.text("task_fine"))), std::string::npos);
}

TEST(GenerationPrompt, TripletRoundTrip) {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const auto t = testing::random_trajectory(rng, static_cast<int>(rng.between(2, 7)));
    const auto p = build_generation_prompt(t, i % 2 ? Granularity::Fine : Granularity::Coarse);
    const auto parsed = parse_triplet_block(triplet_block(p.user_text));
    const auto view = triplet_view(t);
    ASSERT_EQ(parsed.size(), view.size());
    for (std::size_t j = 0; j < view.size(); ++j) {
      EXPECT_EQ(parsed[j].image_number, static_cast<int>(j + 1));
      if (view[j].label) {
        EXPECT_EQ(parsed[j].room_type, view[j].label->room_type);
        EXPECT_EQ(parsed[j].objects, view[j].label->objects);
      } else {
        EXPECT_FALSE(parsed[j].room_type.has_value());
      }
      EXPECT_EQ(parsed[j].action, view[j].action);
    }
    EXPECT_EQ(route_steps(parsed), route_steps(view));
  }
}

TEST(GenerationPrompt, ImagesFollowNodeOrder) {
  const auto t = sample_route();
  MemoryImageSource images;
  for (const auto& n : t.nodes()) images.put(n.frame, "P6 " + n.frame.key());
  const auto p = build_generation_prompt(t, Granularity::Fine, TemplateSet::builtin(), &images);
  ASSERT_EQ(p.images.size(), t.nodes().size());
  for (std::size_t i = 0; i < p.images.size(); ++i) {
    EXPECT_EQ(p.images[i].frame_key, t.nodes()[i].frame.key());
    EXPECT_EQ(p.images[i].bytes, "P6 " + t.nodes()[i].frame.key());
    EXPECT_EQ(p.images[i].mime_type, "image/x-portable-pixmap");
  }
  EXPECT_EQ(p, build_generation_prompt(t, Granularity::Fine, TemplateSet::builtin(), &images));
}

TEST(GenerationPrompt, RequiresGroundedTrajectory) {
  auto nodes = sample_route().nodes();
  for (auto& n : nodes) n.action.reset();
  const auto t = Trajectory::create("x", "vid", nodes, 0);
  try {
    build_generation_prompt(t, Granularity::Coarse);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PreconditionViolated);
  }
}

TEST(ExtractionPrompt, EmbedsInstructionVerbatim) {
  const std::string text =
      "Start from the dining room, turn left into the family room, then go straight into the living room.";
  const auto p = build_extraction_prompt(text);
  EXPECT_NE(p.user_text.find(text), std::string::npos);
  EXPECT_TRUE(p.images.empty());
  EXPECT_EQ(p.template_id, "extraction");
  EXPECT_NE(p.user_text.find("(<room>, <action>)"), std::string::npos);
  EXPECT_EQ(instruction_from_extraction_prompt(p), text);
}

TEST(ExtractionPrompt, BlankInstruction) {
  for (const char* blank : {"", "   ", "\n\t "}) {
    try {
      build_extraction_prompt(blank);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::EmptyInstruction);
    }
  }
}

TEST(Templates, VersionIsContentHash) {
  // Family hash: name, size and content of each member, SHA-256, 12 hex digits.
  const auto& t = TemplateSet::builtin();
  std::string blob;
  for (const char* name : {"generation_system", "generation_user", "task_coarse", "task_fine"}) {
    const auto text = read_file(std::string(VLNPAIRS_DATA_DIR "/templates/") + name + ".txt");
    EXPECT_EQ(t.text(name), text);
    blob += std::string(name) + "\n" + std::to_string(text.size()) + "\n" + text;
  }
  EXPECT_EQ(t.generation_version(), sha256_hex(blob).substr(0, 12));
  EXPECT_EQ(build_generation_prompt(sample_route(), Granularity::Coarse).template_version, t.generation_version());
  EXPECT_EQ(build_extraction_prompt("Go.").template_version, t.extraction_version());
}

TEST(Templates, LoadDirectoryAndReject) {
  const auto dir = fs::temp_directory_path() / "vlnpairs_templates_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const auto& name : TemplateSet::file_names()) {
    fs::copy_file(fs::path(VLNPAIRS_DATA_DIR "/templates") / (name + ".txt"), dir / (name + ".txt"));
  }
  const auto loaded = TemplateSet::load_directory(dir.string());
  EXPECT_EQ(loaded.generation_version(), TemplateSet::builtin().generation_version());

  std::ofstream(dir / "task_fine.txt") << "Detailed please {{mood}}\n";
  EXPECT_THROW(TemplateSet::load_directory(dir.string()), Error);
  fs::remove(dir / "task_fine.txt");
  EXPECT_THROW(TemplateSet::load_directory(dir.string()), Error);
  fs::remove_all(dir);
}

TEST(Templates, RenderAndPlaceholders) {
  EXPECT_EQ(render_template("a {{x}} b {{y}} {{x}}", {{"x", "1"}, {"y", "2"}}), "a 1 b 2 1");
  EXPECT_EQ(template_placeholders("{{b}} {{a}} {{b}}"), (std::vector<std::string>{"b", "a"}));
  EXPECT_THROW(render_template("{{z}}", {}), Error);
}

TEST(ReferenceRendering, Examples) {
  EXPECT_EQ(render_reference_instruction({{"kitchen", {}, Action::Forward}, {"bedroom", {}, Action::Stop}},
                                         Granularity::Coarse),
            "Start in the kitchen, go straight, then stop in the bedroom.");
  const std::vector<RouteStep> three = {{"kitchen", {"stove"}, Action::Forward},
                                        {"hallway", {}, Action::TurnLeft},
                                        {"bedroom", {"bed", "lamp"}, Action::Stop}};
  EXPECT_EQ(render_reference_instruction(three, Granularity::Coarse),
            "Start in the kitchen, go straight into the hallway, turn left, then stop in the bedroom.");
  EXPECT_EQ(render_reference_instruction(three, Granularity::Fine),
            "Start in the kitchen with the stove, go straight into the hallway, turn left, then stop in the "
            "bedroom with the bed and the lamp.");
}

}  // namespace
}  // namespace vlnpairs

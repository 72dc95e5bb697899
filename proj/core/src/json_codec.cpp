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

#include "json_codec.hpp"

#include <climits>

#include "vlnpairs/error.hpp"

namespace vlnpairs::codec {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::SchemaMismatch, what); }

Action decode_action(const json& j) {
  auto a = action_from_name(j.get<std::string>());
  if (!a) bad("unknown action '" + j.get<std::string>() + "'");
  return *a;
}

template <typename T, typename F>
std::vector<T> decode_list(const json& j, F f) {
  if (!j.is_array()) bad("expected an array");
  std::vector<T> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(f(e));
  return out;
}

template <typename T>
json encode_list(const std::vector<T>& v) {
  json out = json::array();
  for (const auto& e : v) out.push_back(encode(e));
  return out;
}

}  // namespace

json encode(const FrameRef& f) {
  return {{"video_id", f.video_id}, {"frame_index", f.frame_index}, {"timestamp_s", f.timestamp_s}};
}

FrameRef decode_frame(const json& j) {
  return {j.at("video_id").get<std::string>(), j.at("frame_index").get<std::uint32_t>(),
          j.at("timestamp_s").get<double>()};
}

json encode(const RoomLabel& l) {
  return {{"room_type", l.room_type}, {"objects", l.objects}, {"room_confidence", l.room_confidence}};
}

RoomLabel decode_label(const json& j) {
  return {j.at("room_type").get<std::string>(), j.at("objects").get<std::vector<std::string>>(),
          j.at("room_confidence").get<double>()};
}

json encode(const TrajectoryNode& n) {
  json j{{"kind", n.is_room() ? "room" : "transition"}, {"frame", encode(n.frame)}};
  j["label"] = n.label ? encode(*n.label) : json(nullptr);
  j["action"] = n.action ? json(std::string(to_string(*n.action))) : json(nullptr);
  return j;
}

TrajectoryNode decode_node(const json& j) {
  TrajectoryNode n;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "room") {
    n.kind = NodeKind::Room;
  } else if (kind == "transition") {
    n.kind = NodeKind::Transition;
  } else {
    bad("unknown node kind '" + kind + "'");
  }
  n.frame = decode_frame(j.at("frame"));
  if (!j.at("label").is_null()) n.label = decode_label(j.at("label"));
  if (!j.at("action").is_null()) n.action = decode_action(j.at("action"));
  return n;
}

json encode(const Trajectory& t) {
  return {{"trajectory_id", t.id()}, {"video_id", t.video_id()}, {"seed", t.seed()}, {"nodes", encode_list(t.nodes())}};
}

Trajectory decode_trajectory(const json& j) {
  try {
    return Trajectory::create(j.at("trajectory_id").get<std::string>(), j.at("video_id").get<std::string>(),
                              decode_list<TrajectoryNode>(j.at("nodes"), decode_node),
                              j.at("seed").get<std::uint64_t>(), TrajectoryLimits{2, INT_MAX});
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidTrajectory) bad(e.detail());
    throw;
  }
}

json encode(const NodeActionPair& p) { return {{"room_type", p.room_type}, {"action", to_string(p.action)}}; }

NodeActionPair decode_node_action(const json& j) {
  return {j.at("room_type").get<std::string>(), decode_action(j.at("action"))};
}

json encode(const CleanupEdit& e) { return {{"rule_id", e.rule_id}, {"before", e.before}, {"after", e.after}}; }

CleanupEdit decode_edit(const json& j) {
  return {j.at("rule_id").get<std::string>(), j.at("before").get<std::string>(), j.at("after").get<std::string>()};
}

json encode(const Instruction& i) {
  return {{"text", i.text},
          {"granularity", to_string(i.granularity)},
          {"model_id", i.model_id},
          {"attempt", i.attempt},
          {"cleanup_edits", encode_list(i.cleanup_edits)}};
}

Instruction decode_instruction(const json& j) {
  Instruction i;
  i.text = j.at("text").get<std::string>();
  auto g = granularity_from_name(j.at("granularity").get<std::string>());
  if (!g) bad("unknown granularity");
  i.granularity = *g;
  i.model_id = j.at("model_id").get<std::string>();
  i.attempt = j.at("attempt").get<int>();
  i.cleanup_edits = decode_list<CleanupEdit>(j.at("cleanup_edits"), decode_edit);
  return i;
}

json encode(const Verdict& v) {
  json mm = json::array();
  for (const auto& m : v.mismatches) {
    mm.push_back({{"index", m.index},
                  {"expected", encode(m.expected)},
                  {"got", m.got ? encode(*m.got) : json(nullptr)}});
  }
  return {{"kind", to_string(v.kind)}, {"mismatches", std::move(mm)}};
}

Verdict decode_verdict(const json& j) {
  Verdict v;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == to_string(Verdict::Kind::Pass)) {
    v.kind = Verdict::Kind::Pass;
  } else if (kind == to_string(Verdict::Kind::Mismatch)) {
    v.kind = Verdict::Kind::Mismatch;
  } else if (kind == to_string(Verdict::Kind::ExtractionFailure)) {
    v.kind = Verdict::Kind::ExtractionFailure;
  } else {
    bad("unknown verdict kind '" + kind + "'");
  }
  for (const auto& m : j.at("mismatches")) {
    MismatchEntry e;
    e.index = m.at("index").get<int>();
    e.expected = decode_node_action(m.at("expected"));
    if (!m.at("got").is_null()) e.got = decode_node_action(m.at("got"));
    v.mismatches.push_back(std::move(e));
  }
  return v;
}

json encode(const VerificationRecord& r) {
  return {{"extracted", encode_list(r.extracted)},
          {"verdict", encode(r.verdict)},
          {"attempts_used", r.attempts_used},
          {"extractor", to_string(r.extractor)},
          {"template_version", r.template_version}};
}

VerificationRecord decode_record(const json& j) {
  VerificationRecord r;
  r.extracted = decode_list<NodeActionPair>(j.at("extracted"), decode_node_action);
  r.verdict = decode_verdict(j.at("verdict"));
  r.attempts_used = j.at("attempts_used").get<int>();
  const auto ex = j.at("extractor").get<std::string>();
  if (ex == to_string(ExtractorKind::LMM)) {
    r.extractor = ExtractorKind::LMM;
  } else if (ex == to_string(ExtractorKind::RuleBased)) {
    r.extractor = ExtractorKind::RuleBased;
  } else {
    bad("unknown extractor '" + ex + "'");
  }
  r.template_version = j.at("template_version").get<std::string>();
  return r;
}

json encode(const PathInstructionPair& p) {
  return {{"pair_id", p.pair_id()},
          {"status", to_string(p.status)},
          {"trajectory", encode(p.trajectory)},
          {"instruction", encode(p.instruction)},
          {"verification", encode(p.verification)}};
}

PathInstructionPair decode_pair(const json& j) {
  const auto status = j.at("status").get<std::string>();
  PairStatus s;
  if (status == to_string(PairStatus::Verified)) {
    s = PairStatus::Verified;
  } else if (status == to_string(PairStatus::Rejected)) {
    s = PairStatus::Rejected;
  } else {
    bad("unknown status '" + status + "'");
  }
  PathInstructionPair p{decode_trajectory(j.at("trajectory")), decode_instruction(j.at("instruction")),
                        decode_record(j.at("verification")), s};
  if (j.contains("pair_id") && j.at("pair_id").get<std::string>() != p.pair_id()) bad("pair_id does not match content");
  return p;
}

}  // namespace vlnpairs::codec

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

#include <json.hpp>

#include "vlnpairs/types.hpp"

namespace vlnpairs::codec {

using json = nlohmann::ordered_json;

json encode(const FrameRef& f);
json encode(const RoomLabel& l);
json encode(const TrajectoryNode& n);
json encode(const Trajectory& t);
json encode(const NodeActionPair& p);
json encode(const CleanupEdit& e);
json encode(const Instruction& i);
json encode(const Verdict& v);
json encode(const VerificationRecord& r);
json encode(const PathInstructionPair& p);

// Decoders throw nlohmann::json::exception or Error(SchemaMismatch) on bad
// input; callers attach location context.
FrameRef decode_frame(const json& j);
RoomLabel decode_label(const json& j);
TrajectoryNode decode_node(const json& j);
Trajectory decode_trajectory(const json& j);
NodeActionPair decode_node_action(const json& j);
CleanupEdit decode_edit(const json& j);
Instruction decode_instruction(const json& j);
Verdict decode_verdict(const json& j);
VerificationRecord decode_record(const json& j);
PathInstructionPair decode_pair(const json& j);

}  // namespace vlnpairs::codec

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

#include <httplib.h>
#include <json.hpp>

#include <thread>

#include "vlnpairs/error.hpp"
#include "vlnpairs/frame_store.hpp"
#include "vlnpairs/grounding.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

using nlohmann::json;

struct AdapterClient::Impl {
  std::string base_url;
  ImageSource& images;
  RetryPolicy retry;
  const RoomLexicon& lexicon;
  std::chrono::milliseconds timeout;

  struct Reply {
    int status = 0;
    std::string body;
    int attempt = 1;
  };

  // One connection per request so concurrent callers never share a socket.
  Reply send(const char* method, const std::string& path, const std::string& body, ErrorCode failure) {
    auto backoff = retry.initial_backoff;
    std::string last_error;
    const int attempts = std::max(1, retry.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      httplib::Client cli(base_url);
      cli.set_connection_timeout(timeout);
      cli.set_read_timeout(timeout);
      cli.set_write_timeout(timeout);
      httplib::Result res = std::string_view(method) == "GET"
                                ? cli.Get(path)
                                : cli.Post(path, body, "application/json");
      if (res) {
        if (res->status >= 200 && res->status < 300) return {res->status, res->body, attempt};
        last_error = path + " returned HTTP " + std::to_string(res->status) + ": " + res->body;
        if (res->status >= 400 && res->status < 500) throw Error(failure, last_error, attempt);
      } else {
        last_error = path + ": " + httplib::to_string(res.error());
      }
      if (attempt < attempts) {
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * retry.backoff_multiplier));
      }
    }
    throw Error(failure, last_error, attempts);
  }
};

AdapterClient::AdapterClient(std::string base_url, ImageSource& images, RetryPolicy retry,
                             const RoomLexicon& lexicon, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>(Impl{std::move(base_url), images, retry, lexicon, timeout})) {}

AdapterClient::~AdapterClient() = default;

std::string AdapterClient::label_request_body(std::string_view image_bytes, const std::string& frame_key) {
  json body = {{"image", base64_encode(image_bytes)}, {"frame_key", frame_key}};
  return body.dump();
}

std::string AdapterClient::action_request_body(std::string_view image_a, std::string_view image_b,
                                               const std::string& key_a, const std::string& key_b) {
  json body = {{"image_a", base64_encode(image_a)},
               {"image_b", base64_encode(image_b)},
               {"key_a", key_a},
               {"key_b", key_b}};
  return body.dump();
}

RoomLabel AdapterClient::parse_label_response(std::string_view body, const RoomLexicon& lexicon) {
  try {
    json j = json::parse(body);
    RoomLabel label;
    auto room = lexicon.canonicalize(j.at("room_type").get<std::string>());
    if (!room) throw Error(ErrorCode::LabelerUnavailable, "label response room_type outside the lexicon");
    label.room_type = *room;
    for (const auto& o : j.at("objects")) {
      auto obj = o.get<std::string>();
      if (std::find(label.objects.begin(), label.objects.end(), obj) == label.objects.end()) {
        label.objects.push_back(std::move(obj));
      }
    }
    label.room_confidence = j.at("room_confidence").get<double>();
    if (!(label.room_confidence >= 0.0 && label.room_confidence <= 1.0)) {
      throw Error(ErrorCode::LabelerUnavailable, "label response room_confidence outside [0, 1]");
    }
    return label;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::LabelerUnavailable, std::string("malformed label response: ") + e.what());
  }
}

Action AdapterClient::parse_action_response(std::string_view body) {
  try {
    json j = json::parse(body);
    auto action = action_from_wire(j.at("action").get<std::string>());
    if (!action || *action == Action::Stop) {
      throw Error(ErrorCode::ActionClientUnavailable, "action response carries an invalid action");
    }
    double confidence = j.value("confidence", 1.0);
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
      throw Error(ErrorCode::ActionClientUnavailable, "action response confidence outside [0, 1]");
    }
    return *action;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ActionClientUnavailable, std::string("malformed action response: ") + e.what());
  }
}

RoomLabel AdapterClient::label(const FrameRef& frame) {
  const std::string body = label_request_body(impl_->images.read(frame), frame.key());
  auto reply = impl_->send("POST", "/label", body, ErrorCode::LabelerUnavailable);
  try {
    return parse_label_response(reply.body, impl_->lexicon);
  } catch (const Error& e) {
    throw Error(e.code(), e.detail(), reply.attempt);
  }
}

Action AdapterClient::infer(const FrameRef& from, const FrameRef& to) {
  const std::string body =
      action_request_body(impl_->images.read(from), impl_->images.read(to), from.key(), to.key());
  auto reply = impl_->send("POST", "/action", body, ErrorCode::ActionClientUnavailable);
  try {
    return parse_action_response(reply.body);
  } catch (const Error& e) {
    throw Error(e.code(), e.detail(), reply.attempt);
  }
}

AdapterHealth AdapterClient::health() {
  httplib::Client cli(impl_->base_url);
  cli.set_connection_timeout(impl_->timeout);
  cli.set_read_timeout(impl_->timeout);
  auto res = cli.Get("/health");
  AdapterHealth h;
  if (!res) {
    h.status = "unreachable";
    return h;
  }
  try {
    json j = json::parse(res->body);
    h.status = j.value("status", "");
    h.backend_id = j.value("backend_id", "");
    h.lexicon_version = j.value("lexicon_version", "");
  } catch (const json::exception&) {
    h.status = "malformed";
  }
  h.ready = res->status == 200;
  return h;
}

}  // namespace vlnpairs

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

#include "vlnpairs/gateway.hpp"

namespace vlnpairs {

HttpPost default_http_post() {
  return [](const std::string& url, const std::string& body, const std::map<std::string, std::string>& headers,
            std::chrono::milliseconds timeout) -> HttpResponse {
    // Split "scheme://host[:port]/path".
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client cli(origin);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);

    HttpResponse out;
    auto res = cli.Post(path, h, body, "application/json");
    if (!res) {
      out.error = httplib::to_string(res.error());
      out.timed_out = res.error() == httplib::Error::ConnectionTimeout || res.error() == httplib::Error::Read;
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  };
}

}  // namespace vlnpairs

/*
 * Copyright 2026 The topicmap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Read-only HTTP/JSON API over a loaded bundle.
//
//   GET  /api/map?tau=&docs_per_cell=
//   GET  /api/topic/{level}/{id}?k=&tau=
//   GET  /api/subtopic/{id}/documents?offset=&limit=&tau=
//   GET  /api/document/{doc_id}
//   POST /api/search        {"text": "...", "top_n": 10}
//   GET  /api/health
//
// Errors: {"error": {"code": ..., "message": ...}}.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "topicmap/persistence.hpp"

namespace httplib {
class Server;
}

namespace topicmap {

inline constexpr std::string_view kServiceVersion = "1.0.0";

struct Response {
  int status = 200;
  std::string body;
};

Response error_response(int status, std::string_view code, std::string_view message);

class ExplorerService {
 public:
  // `map_defaults` applies when a request omits tau / docs_per_cell.
  explicit ExplorerService(Bundle bundle, MapOptions map_defaults = {});

  const Bundle& bundle() const { return bundle_; }

  Response map(std::optional<std::string_view> tau,
               std::optional<std::string_view> docs_per_cell) const;
  Response topic(std::string_view level, std::string_view id,
                 std::optional<std::string_view> k,
                 std::optional<std::string_view> tau) const;
  // `id` is a map node id "subtopic:<parent>:<child>" or "<parent>:<child>".
  Response subtopic_documents(std::string_view id,
                              std::optional<std::string_view> offset,
                              std::optional<std::string_view> limit,
                              std::optional<std::string_view> tau) const;
  Response document(std::string_view doc_id) const;
  Response search(std::string_view request_body) const;
  Response health() const;

  // When `log` is set every request is logged with its wall time.
  void register_routes(httplib::Server& server, std::ostream* log = nullptr) const;

 private:
  Bundle bundle_;
  MapOptions map_defaults_;
  std::string bundle_hash_;
};

nlohmann::json map_node_to_json(const MapNode& node);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> static_dir;
  MapOptions map_defaults;
};

// Loads the bundle and serves until the process is stopped. Throws on bundle
// errors and when the address cannot be bound.
void serve(const std::filesystem::path& bundle_path, const ServeOptions& options,
           std::ostream& log);

}  // namespace topicmap

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

#include "topicmap/service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>

#include "httplib.h"

namespace topicmap {

namespace {

using nlohmann::json;

constexpr std::size_t kDefaultTopWords = 10;
constexpr std::size_t kMaxTopWords = 1000;
constexpr std::size_t kDefaultPageSize = 10;
constexpr std::size_t kMaxPageSize = 1000;
constexpr std::size_t kMaxSearchHits = 1000;

// Thrown by the parameter parsers; becomes a 400.
struct BadRequest {
  std::string code;
  std::string message;
};

Response ok(const json& body) { return {200, body.dump()}; }

std::size_t parse_count(std::optional<std::string_view> raw, std::string_view name,
                        std::size_t fallback, std::size_t lo, std::size_t hi) {
  if (!raw) return fallback;
  std::size_t v = 0;
  const auto* end = raw->data() + raw->size();
  const auto [ptr, ec] = std::from_chars(raw->data(), end, v);
  if (ec != std::errc() || ptr != end || v < lo || v > hi) {
    throw BadRequest{"invalid_argument", std::string(name) + " must be an integer in [" +
                                             std::to_string(lo) + ", " +
                                             std::to_string(hi) + "]"};
  }
  return v;
}

double parse_real(std::optional<std::string_view> raw, std::string_view name,
                  double fallback) {
  if (!raw) return fallback;
  const std::string s(*raw);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v)) {
    throw BadRequest{"invalid_argument", std::string(name) + " must be a real number"};
  }
  return v;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json top_topics(const TopicModelLevel& level, const std::vector<double>& dist,
                std::size_t n) {
  auto subjects = level.subject_topics();
  std::stable_sort(subjects.begin(), subjects.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  subjects.resize(std::min(n, subjects.size()));
  json out = json::array();
  for (const auto t : subjects) {
    out.push_back({{"topic", t}, {"weight", dist[t]}, {"label", topic_label(level, t)}});
  }
  return out;
}

json profile_summary(const DocumentProfile& p, std::size_t child) {
  return {{"doc_id", p.doc_id},
          {"source", p.source},
          {"title_snippet", p.title_snippet},
          {"weight", p.level2_dist[child]}};
}

std::optional<std::string_view> param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  const auto it = req.params.find(key);
  return std::string_view(it->second);
}

}  // namespace

Response error_response(int status, std::string_view code, std::string_view message) {
  const json body{{"error", {{"code", code}, {"message", message}}}};
  return {status, body.dump()};
}

nlohmann::json map_node_to_json(const MapNode& node) {
  json children = json::array();
  for (const auto& c : node.children) children.push_back(map_node_to_json(c));
  return {{"kind", map_node_kind_name(node.kind)},
          {"id", node.id},
          {"label", node.label},
          {"weight", node.weight},
          {"children", std::move(children)}};
}

ExplorerService::ExplorerService(Bundle bundle, MapOptions map_defaults)
    : bundle_(std::move(bundle)),
      map_defaults_(map_defaults),
      bundle_hash_(hex64(bundle_.index.model_hash())) {}

Response ExplorerService::map(std::optional<std::string_view> tau,
                              std::optional<std::string_view> docs_per_cell) const {
  try {
    MapOptions options = map_defaults_;
    options.edge_tau = parse_real(tau, "tau", options.edge_tau);
    options.docs_per_cell =
        parse_count(docs_per_cell, "docs_per_cell", options.docs_per_cell, 0, kMaxPageSize);
    return ok(map_node_to_json(build_map(bundle_.model, bundle_.index, options)));
  } catch (const BadRequest& e) {
    return error_response(400, e.code, e.message);
  }
}

Response ExplorerService::topic(std::string_view level_raw, std::string_view id_raw,
                                std::optional<std::string_view> k_raw,
                                std::optional<std::string_view> tau_raw) const {
  const auto& model = bundle_.model;
  std::size_t level = 0;
  std::size_t id = 0;
  std::size_t k = 0;
  double tau = 0.0;
  try {
    level = parse_count(level_raw, "level", 0, 1, 2);
    k = parse_count(k_raw, "k", kDefaultTopWords, 1, kMaxTopWords);
    tau = parse_real(tau_raw, "tau", map_defaults_.edge_tau);
    id = parse_count(id_raw, "id", 0, 0, std::numeric_limits<std::size_t>::max());
  } catch (const BadRequest& e) {
    return error_response(400, e.code, e.message);
  }
  const auto& lvl = level == 1 ? model.level1 : model.level2;
  if (id >= lvl.num_topics()) {
    return error_response(404, "unknown_topic",
                          "level " + std::to_string(level) + " has no topic " +
                              std::to_string(id));
  }
  json words = json::array();
  for (const auto& [w, p] : top_words(lvl, id, k)) {
    words.push_back({{"word", w}, {"probability", p}});
  }
  const bool subject = lvl.roles[id] == TopicRole::kSubject;
  json body{{"level", level},
            {"id", id},
            {"role", subject ? "subject" : "background"},
            {"label", topic_label(lvl, id)},
            {"mass", lvl.n_t[static_cast<Eigen::Index>(id)]},
            {"top_words", std::move(words)}};

  // Edges with psi >= tau, strongest first; level 1 lists children, level 2
  // lists parents.
  json edges = json::array();
  if (subject) {
    for (const auto& e : edge_list(model, true)) {
      if (e.weight < tau) break;
      if (level == 1 && e.parent == id) {
        edges.push_back({{"child", e.child}, {"psi", e.weight},
                         {"label", topic_label(model.level2, e.child)}});
      } else if (level == 2 && e.child == id) {
        edges.push_back({{"parent", e.parent}, {"psi", e.weight},
                         {"label", topic_label(model.level1, e.parent)}});
      }
    }
  }
  body[level == 1 ? "children" : "parents"] = std::move(edges);
  return ok(body);
}

Response ExplorerService::subtopic_documents(std::string_view id,
                                             std::optional<std::string_view> offset_raw,
                                             std::optional<std::string_view> limit_raw,
                                             std::optional<std::string_view> tau_raw) const {
  const auto& model = bundle_.model;
  std::size_t offset = 0;
  std::size_t limit = 0;
  double tau = 0.0;
  std::size_t parent = 0;
  std::size_t child = 0;
  try {
    offset = parse_count(offset_raw, "offset", 0, 0, std::numeric_limits<std::size_t>::max());
    limit = parse_count(limit_raw, "limit", kDefaultPageSize, 1, kMaxPageSize);
    tau = parse_real(tau_raw, "tau", map_defaults_.edge_tau);
    std::string_view rest = id;
    if (rest.starts_with("subtopic:")) rest.remove_prefix(9);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) {
      throw BadRequest{"invalid_argument", "subtopic id must look like subtopic:<parent>:<child>"};
    }
    parent = parse_count(rest.substr(0, colon), "parent", 0, 0,
                         std::numeric_limits<std::size_t>::max());
    child = parse_count(rest.substr(colon + 1), "child", 0, 0,
                        std::numeric_limits<std::size_t>::max());
  } catch (const BadRequest& e) {
    return error_response(400, e.code, e.message);
  }
  if (parent >= model.level1.num_topics() || child >= model.level2.num_topics() ||
      model.level1.roles[parent] != TopicRole::kSubject ||
      model.level2.roles[child] != TopicRole::kSubject) {
    return error_response(404, "unknown_subtopic", "no subtopic " + std::string(id));
  }
  const auto layout = layout_map(model, bundle_.index, tau);
  const auto& ps = layout.parents_of[child];
  if (std::find(ps.begin(), ps.end(), parent) == ps.end()) {
    return error_response(404, "unknown_subtopic",
                          "subtopic " + std::string(id) + " is not on the map at this tau");
  }
  const auto docs = topicmap::subtopic_documents(bundle_.index, layout, parent, child);
  json page = json::array();
  for (std::size_t i = offset; i < docs.size() && i - offset < limit; ++i) {
    page.push_back(profile_summary(*docs[i], child));
  }
  return ok({{"id", subtopic_node_id(parent, child)},
             {"total", docs.size()},
             {"offset", offset},
             {"limit", limit},
             {"documents", std::move(page)}});
}

Response ExplorerService::document(std::string_view doc_id) const {
  const auto* p = bundle_.index.find(doc_id);
  if (p == nullptr) {
    return error_response(404, "unknown_document", "no document '" + std::string(doc_id) + "'");
  }
  return ok({{"doc_id", p->doc_id},
             {"source", p->source},
             {"title_snippet", p->title_snippet},
             {"level1_dist", p->level1_dist},
             {"level2_dist", p->level2_dist},
             {"top_topics",
              {{"level1", top_topics(bundle_.model.level1, p->level1_dist, 3)},
               {"level2", top_topics(bundle_.model.level2, p->level2_dist, 3)}}}});
}

Response ExplorerService::search(std::string_view request_body) const {
  json req;
  try {
    req = json::parse(request_body);
  } catch (const json::parse_error& e) {
    return error_response(400, "invalid_json", e.what());
  }
  if (!req.is_object() || !req.contains("text") || !req["text"].is_string()) {
    return error_response(400, "invalid_argument", "body must be {\"text\": string}");
  }
  std::size_t top_n = 10;
  if (req.contains("top_n")) {
    const auto& n = req["top_n"];
    if (!n.is_number_integer() || n.get<long long>() < 1 ||
        n.get<long long>() > static_cast<long long>(kMaxSearchHits)) {
      return error_response(400, "invalid_argument",
                            "top_n must be an integer in [1, " +
                                std::to_string(kMaxSearchHits) + "]");
    }
    top_n = n.get<std::size_t>();
  }
  const auto text = req["text"].get<std::string>();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    return error_response(400, "empty_query", "query text is empty");
  }
  std::vector<SearchHit> hits;
  try {
    hits = topicmap::search(bundle_.index, bundle_.model, text, top_n);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kQueryEmptyAfterProjection) {
      return error_response(400, "no_recognizable_terms", e.what());
    }
    throw;
  }
  json out = json::array();
  for (const auto& h : hits) {
    const auto* p = bundle_.index.find(h.doc_id);
    out.push_back({{"doc_id", h.doc_id},
                   {"score", h.score},
                   {"rank", h.rank},
                   {"matched_topics", h.matched_topics},
                   {"title_snippet", p ? p->title_snippet : std::string()}});
  }
  return ok({{"hits", std::move(out)}});
}

Response ExplorerService::health() const {
  const auto& m = bundle_.model;
  return ok({{"status", "ok"},
             {"version", kServiceVersion},
             {"format_version", kFormatVersion},
             {"bundle_hash", bundle_hash_},
             {"documents", bundle_.index.size()},
             {"topics",
              {{"level1", {{"subject", m.level1.num_subject()},
                           {"background", m.level1.num_topics() - m.level1.num_subject()}}},
               {"level2", {{"subject", m.level2.num_subject()},
                           {"background", m.level2.num_topics() - m.level2.num_subject()}}}}}});
}

void ExplorerService::register_routes(httplib::Server& server, std::ostream* log) const {
  auto log_mutex = std::make_shared<std::mutex>();
  using Handler = std::function<Response(const httplib::Request&)>;
  auto wrap = [this, log, log_mutex](Handler handler) {
    return [handler = std::move(handler), log, log_mutex](const httplib::Request& req,
                                                          httplib::Response& res) {
      const auto start = std::chrono::steady_clock::now();
      Response r;
      try {
        r = handler(req);
      } catch (const std::exception& e) {
        r = error_response(500, "internal_error", e.what());
      }
      res.status = r.status;
      res.set_content(r.body, "application/json; charset=utf-8");
      if (log != nullptr) {
        const auto ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", ms);
        std::lock_guard lock(*log_mutex);
        *log << req.method << ' ' << req.path << ' ' << r.status << ' ' << buf << "ms\n"
             << std::flush;
      }
    };
  };

  server.Get("/api/map", wrap([this](const httplib::Request& req) {
               return map(param(req, "tau"), param(req, "docs_per_cell"));
             }));
  server.Get(R"(/api/topic/([^/]+)/([^/]+))", wrap([this](const httplib::Request& req) {
               return topic(req.matches[1].str(), req.matches[2].str(), param(req, "k"),
                            param(req, "tau"));
             }));
  server.Get(R"(/api/subtopic/([^/]+)/documents)", wrap([this](const httplib::Request& req) {
               return subtopic_documents(req.matches[1].str(), param(req, "offset"),
                                         param(req, "limit"), param(req, "tau"));
             }));
  server.Get(R"(/api/document/(.+))", wrap([this](const httplib::Request& req) {
               return document(req.matches[1].str());
             }));
  server.Post("/api/search", wrap([this](const httplib::Request& req) {
                return search(req.body);
              }));
  server.Get("/api/health", wrap([this](const httplib::Request&) { return health(); }));

  // Unmatched /api routes get a JSON 404 instead of httplib's empty body.
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty() && req.path.starts_with("/api/")) {
      const auto r = error_response(res.status, res.status == 404 ? "not_found" : "error",
                                    "no route for " + req.method + " " + req.path);
      res.set_content(r.body, "application/json; charset=utf-8");
    }
  });
}

void serve(const std::filesystem::path& bundle_path, const ServeOptions& options,
           std::ostream& log) {
  const ExplorerService service(load_bundle(bundle_path), options.map_defaults);
  httplib::Server server;
  service.register_routes(server, &log);
  if (options.static_dir) {
    if (!server.set_mount_point("/", options.static_dir->string())) {
      throw Error(ErrorCode::kIo, "static directory not found: " + options.static_dir->string());
    }
  }
  int port = options.port;
  if (port == 0) {
    port = server.bind_to_any_port(options.host);
  } else if (!server.bind_to_port(options.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + options.host + ":" + std::to_string(options.port));
  }
  log << "serving " << bundle_path.string() << " on http://" << options.host << ':' << port
      << '\n'
      << std::flush;
  if (!server.listen_after_bind()) {
    throw Error(ErrorCode::kIo, "server stopped unexpectedly");
  }
}

}  // namespace topicmap

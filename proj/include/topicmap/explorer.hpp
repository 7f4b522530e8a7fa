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

// Exploratory search over a hierarchical topic model: per-document topic
// profiles, fold-in of unseen text, Hellinger ranking and the
// topic / subtopic / document knowledge map.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "topicmap/corpus.hpp"
#include "topicmap/hierarchy.hpp"

namespace topicmap {

struct DocumentProfile {
  std::string doc_id;
  std::string source;
  std::vector<double> level1_dist;
  std::vector<double> level2_dist;
  std::string title_snippet;  // at most kSnippetLength code points

  bool operator==(const DocumentProfile&) const = default;
};

inline constexpr std::size_t kSnippetLength = 120;

class SearchIndex {
 public:
  SearchIndex() = default;
  SearchIndex(std::vector<DocumentProfile> profiles, std::uint64_t model_hash);

  const std::vector<DocumentProfile>& profiles() const { return profiles_; }
  std::uint64_t model_hash() const { return model_hash_; }
  const DocumentProfile* find(std::string_view doc_id) const;
  std::size_t size() const { return profiles_.size(); }

  bool operator==(const SearchIndex& other) const {
    return model_hash_ == other.model_hash_ && profiles_ == other.profiles_;
  }

 private:
  std::vector<DocumentProfile> profiles_;
  std::uint64_t model_hash_ = 0;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// First kSnippetLength code points of `text`.
std::string make_snippet(std::string_view text);

// Snippet built from the document's most frequent tokens; used when no raw
// title text is available.
std::string token_snippet(const Document& doc, const Vocabulary& vocabulary);

// One profile per real (non-pseudo) document of `corpus`, read from the
// trained theta columns. `titles` maps doc_id to raw text for snippets.
SearchIndex build_index(
    const HierarchicalModel& model, const Corpus& corpus,
    const std::unordered_map<std::string, std::string>& titles = {});

struct LevelDistributions {
  std::vector<double> level1;
  std::vector<double> level2;
};

inline constexpr std::size_t kFoldInIterations = 20;

// Estimates p(t|query) on each level with phi frozen, starting from uniform.
// Throws kQueryEmptyAfterProjection for an empty query.
LevelDistributions fold_in(const HierarchicalModel& model,
                           const Document& query,
                           std::size_t iterations = kFoldInIterations);

// Tokenizes free text and projects it onto the model vocabulary.
// Throws kQueryEmptyAfterProjection when nothing is recognized.
Document make_query_document(const HierarchicalModel& model,
                             std::string_view text);

// Hellinger distance between two probability vectors, in [0, 1].
double hellinger(std::span<const double> p, std::span<const double> q);

struct SearchHit {
  std::string doc_id;
  double score;
  std::size_t rank;
  std::vector<std::size_t> matched_topics;  // top-3 level-2 subject topics

  bool operator==(const SearchHit&) const = default;
};

// score = 1 - Hellinger over (level1 ++ level2) / 2, ties by doc_id.
std::vector<SearchHit> search(const SearchIndex& index,
                              const HierarchicalModel& model,
                              std::string_view query_text,
                              std::size_t top_n = 10);

// Same ranking for an already inferred query distribution; every hit carries
// `matched_topics`.
std::vector<SearchHit> rank_profiles(
    const SearchIndex& index, const LevelDistributions& query,
    std::size_t top_n, const std::vector<std::size_t>& matched_topics = {});

enum class MapNodeKind { kRoot, kTopic, kSubtopic, kDocument, kMore };

std::string_view map_node_kind_name(MapNodeKind kind);

struct MapNode {
  MapNodeKind kind = MapNodeKind::kRoot;
  std::string id;
  std::string label;
  double weight = 1.0;
  std::vector<MapNode> children;
};

struct MapOptions {
  double edge_tau = 0.05;
  std::size_t docs_per_cell = 10;
};

// Where each document lives on the map: its argmax level-2 subject topic,
// under the parent chosen among that topic's edges.
struct MapPlacement {
  std::size_t parent;
  std::size_t child;
};

struct MapLayout {
  // parents_of[child] for every level-2 topic (empty for background).
  std::vector<std::vector<std::size_t>> parents_of;
  // One entry per index profile, aligned with index.profiles().
  std::vector<MapPlacement> placements;
};

MapLayout layout_map(const HierarchicalModel& model, const SearchIndex& index,
                     double edge_tau);

// Every document placed under (parent, child), by level-2 weight descending,
// ties by doc_id.
std::vector<const DocumentProfile*> subtopic_documents(
    const SearchIndex& index, const MapLayout& layout, std::size_t parent,
    std::size_t child);

std::string subtopic_node_id(std::size_t parent, std::size_t child);

MapNode build_map(const HierarchicalModel& model, const SearchIndex& index,
                  const MapOptions& options = {});

// Top-3 words joined by ", ".
std::string topic_label(const TopicModelLevel& level, std::size_t topic);

}  // namespace topicmap

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

// Quality measures for hierarchical topic models: embedding-based topic
// coherence, hierarchy-edge ranking quality (AP@k) and the ablation report
// comparing aggregation strategies.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "topicmap/aggregate.hpp"
#include "topicmap/hierarchy.hpp"

namespace topicmap {

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  std::size_t duplicates() const { return duplicates_; }

  // Last insert wins; a replaced token bumps duplicates().
  // Throws kDimensionMismatch / kInvalidArgument on non-finite entries.
  void insert(const std::string& token, std::vector<double> vector);
  const std::vector<double>* find(const std::string& token) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::size_t duplicates_ = 0;
};

// Header "count dim", then "token v1 ... v_dim" per line.
// Throws kMalformedEmbeddingLine, kDimensionMismatch.
EmbeddingTable load_embeddings(std::istream& in);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Mean pairwise cosine over embedded words, times 100. Words without a
// (non-zero) embedding are skipped and counted in `missing`.
// Throws kTooFewEmbeddedWords when fewer than two words are embedded.
double topic_coherence(std::span<const std::string> words,
                       const EmbeddingTable& table,
                       std::size_t* missing = nullptr);

struct LevelQuality {
  double value = 0.0;
  std::size_t scored_topics = 0;
  std::size_t failed_topics = 0;
};

// Mean coherence of the subject topics' top-k words. Throws
// kTooFewEmbeddedWords only when no topic can be scored.
LevelQuality level_quality(const TopicModelLevel& level,
                           const EmbeddingTable& table, std::size_t k = 10);

struct EdgeJudgment {
  Edge edge;
  double similarity = 0.0;
  bool relevant = false;
};

// Mean cosine over all (parent word, child word) pairs of the two top-k
// lists. Throws kTooFewEmbeddedWords when either side has no embedded word.
EdgeJudgment edge_relevance(const Edge& edge, const TopicModelLevel& level1,
                            const TopicModelLevel& level2,
                            const EmbeddingTable& table, std::size_t k = 10);

// Marks judgments with similarity >= the given percentile of all
// similarities. The threshold is the r-th smallest similarity with
// r = min(n, floor(percentile * n / 100) + 1).
std::vector<EdgeJudgment> binarize_judgments(std::vector<EdgeJudgment> judgments,
                                             double percentile = 75.0);

// AP@k = sum_{i<=k, rel_i} precision@i / min(k, R), R = relevant items in
// the whole list; reported in percent (0 when R = 0).
double average_precision_at_k(std::span<const bool> ranked_relevance,
                              std::size_t k);

struct StrategyRow {
  Strategy strategy;
  std::string label;
  bool failed = false;
  std::string error;
  double level1_quality = 0.0;
  double level2_quality = 0.0;
  std::vector<std::pair<std::size_t, double>> ap;  // (k, AP@k)
  std::vector<std::pair<double, std::size_t>> edge_curve;
  std::size_t judged_edges = 0;
  std::size_t unjudged_edges = 0;
  // Per initial level-1 subject topic: |top-10 before and after| / 10 of the
  // same topic index.
  std::vector<double> initial_topic_overlap;
};

struct AblationReport {
  std::vector<StrategyRow> rows;
  std::vector<std::size_t> k_list;
  nlohmann::json provenance;

  nlohmann::json to_json() const;
  // Aligned text table with one row per strategy.
  std::string to_text() const;
};

struct EdgeQuality {
  std::vector<std::pair<std::size_t, double>> ap;
  std::size_t judged = 0;
  std::size_t unjudged = 0;
};

// Ranks subject edges by psi, judges and binarizes them and reports AP@k.
EdgeQuality edge_quality(const HierarchicalModel& model,
                         const EmbeddingTable& table,
                         std::span<const std::size_t> k_list,
                         std::size_t top_k = 10, double percentile = 75.0);

struct AblationOptions {
  std::vector<std::size_t> k_list{100, 200, 500, 1000};
  std::size_t top_k = 10;
  double percentile = 75.0;
  std::vector<double> tau_grid = default_tau_grid();
  // Run strategies on separate threads.
  bool parallel = true;
};

AblationReport ablation_report(const HierarchicalModel& initial_model,
                               const Corpus& initial_corpus,
                               const Corpus& added_corpus,
                               std::span<const Strategy> strategies,
                               const EmbeddingTable& table,
                               const HierarchyConfig& config,
                               const AblationOptions& options = {});

// Scores one already aggregated model; used by ablation_report.
StrategyRow evaluate_strategy(const HierarchicalModel& initial_model,
                              const AggregationResult& result,
                              const EmbeddingTable& table,
                              const AblationOptions& options);

}  // namespace topicmap

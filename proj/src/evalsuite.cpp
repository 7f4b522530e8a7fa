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

#include "topicmap/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <istream>
#include <memory>
#include <set>
#include <sstream>

#include "topicmap/persistence.hpp"

namespace topicmap {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Embedded, non-zero vectors of `words`, in order.
std::vector<const std::vector<double>*> embedded(std::span<const std::string> words,
                                                 const EmbeddingTable& table,
                                                 std::size_t* missing) {
  std::vector<const std::vector<double>*> out;
  std::size_t miss = 0;
  for (const auto& w : words) {
    const auto* v = table.find(w);
    if (v == nullptr || norm(*v) == 0.0) {
      ++miss;
      continue;
    }
    out.push_back(v);
  }
  if (missing) *missing = miss;
  return out;
}

std::vector<std::string> top_tokens(const TopicModelLevel& level,
                                    std::size_t topic, std::size_t k) {
  std::vector<std::string> out;
  for (auto& [w, p] : top_words(level, topic, k)) out.push_back(std::move(w));
  return out;
}

std::string format_fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

}  // namespace

void EmbeddingTable::insert(const std::string& token, std::vector<double> vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding for '" + token + "' has " + std::to_string(vector.size()) +
                    " values, expected " + std::to_string(dim_));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "embedding for '" + token + "' has a non-finite entry");
    }
  }
  auto [it, inserted] = vectors_.insert_or_assign(token, std::move(vector));
  if (!inserted) ++duplicates_;
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  const auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto malformed = [&](const std::string& why) {
    return Error(ErrorCode::kMalformedEmbeddingLine,
                 "line " + std::to_string(line_no) + ": " + why);
  };
  if (!std::getline(in, line)) {
    ++line_no;
    throw malformed("missing header");
  }
  ++line_no;
  std::size_t count = 0;
  std::size_t dim = 0;
  {
    std::istringstream header(line);
    std::string extra;
    if (!(header >> count >> dim) || (header >> extra) || dim == 0) {
      throw malformed("header must be 'count dim'");
    }
  }
  EmbeddingTable table(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    std::string value;
    while (fields >> value) {
      double v = 0.0;
      std::size_t used = 0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        throw malformed("'" + value + "' is not a number");
      }
      if (used != value.size()) throw malformed("'" + value + "' is not a number");
      values.push_back(v);
    }
    table.insert(token, std::move(values));
  }
  return table;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double denom = norm(a) * norm(b);
  if (denom == 0.0) return 0.0;
  return std::clamp(dot / denom, -1.0, 1.0);
}

double topic_coherence(std::span<const std::string> words,
                       const EmbeddingTable& table, std::size_t* missing) {
  const auto vecs = embedded(words, table, missing);
  if (vecs.size() < 2) {
    throw Error(ErrorCode::kTooFewEmbeddedWords,
                "topic coherence needs at least two embedded words");
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    for (std::size_t j = i + 1; j < vecs.size(); ++j) {
      sum += cosine_similarity(*vecs[i], *vecs[j]);
      ++pairs;
    }
  }
  return 100.0 * sum / static_cast<double>(pairs);
}

LevelQuality level_quality(const TopicModelLevel& level,
                           const EmbeddingTable& table, std::size_t k) {
  const auto subjects = level.subject_topics();
  if (subjects.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "level has no subject topics");
  }
  LevelQuality q;
  double sum = 0.0;
  for (const auto t : subjects) {
    const auto words = top_tokens(level, t, k);
    try {
      sum += topic_coherence(words, table);
      ++q.scored_topics;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTooFewEmbeddedWords) throw;
      ++q.failed_topics;
    }
  }
  if (q.scored_topics == 0) {
    throw Error(ErrorCode::kTooFewEmbeddedWords,
                "no subject topic has two embedded top words");
  }
  q.value = sum / static_cast<double>(q.scored_topics);
  return q;
}

EdgeJudgment edge_relevance(const Edge& edge, const TopicModelLevel& level1,
                            const TopicModelLevel& level2,
                            const EmbeddingTable& table, std::size_t k) {
  if (edge.parent >= level1.num_topics() || edge.child >= level2.num_topics() ||
      level1.roles[edge.parent] != TopicRole::kSubject ||
      level2.roles[edge.child] != TopicRole::kSubject) {
    throw Error(ErrorCode::kInvalidArgument, "edges are judged between subject topics only");
  }
  const auto parent_words = top_tokens(level1, edge.parent, k);
  const auto child_words = top_tokens(level2, edge.child, k);
  const auto pv = embedded(parent_words, table, nullptr);
  const auto cv = embedded(child_words, table, nullptr);
  if (pv.empty() || cv.empty()) {
    throw Error(ErrorCode::kTooFewEmbeddedWords,
                "an edge endpoint has no embedded top words");
  }
  double sum = 0.0;
  for (const auto* a : pv) {
    for (const auto* b : cv) sum += cosine_similarity(*a, *b);
  }
  EdgeJudgment j;
  j.edge = edge;
  j.similarity = sum / static_cast<double>(pv.size() * cv.size());
  return j;
}

std::vector<EdgeJudgment> binarize_judgments(std::vector<EdgeJudgment> judgments,
                                             double percentile) {
  if (judgments.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "nothing to binarize");
  }
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw Error(ErrorCode::kInvalidArgument, "percentile must lie in [0, 100]");
  }
  std::vector<double> sims;
  sims.reserve(judgments.size());
  for (const auto& j : judgments) sims.push_back(j.similarity);
  std::sort(sims.begin(), sims.end());
  const auto n = sims.size();
  const auto rank = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::floor(percentile * static_cast<double>(n) / 100.0)) + 1);
  const double threshold = sims[rank - 1];
  for (auto& j : judgments) j.relevant = j.similarity >= threshold;
  return judgments;
}

double average_precision_at_k(std::span<const bool> ranked_relevance,
                              std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  const auto total_relevant = static_cast<std::size_t>(
      std::count(ranked_relevance.begin(), ranked_relevance.end(), true));
  if (total_relevant == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  const auto limit = std::min(k, ranked_relevance.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (!ranked_relevance[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return 100.0 * sum / static_cast<double>(std::min(k, total_relevant));
}

EdgeQuality edge_quality(const HierarchicalModel& model,
                         const EmbeddingTable& table,
                         std::span<const std::size_t> k_list, std::size_t top_k,
                         double percentile) {
  EdgeQuality out;
  std::vector<EdgeJudgment> judgments;
  for (const auto& edge : edge_list(model, true)) {
    try {
      judgments.push_back(edge_relevance(edge, model.level1, model.level2, table, top_k));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTooFewEmbeddedWords) throw;
      ++out.unjudged;
    }
  }
  out.judged = judgments.size();
  if (judgments.empty()) {
    throw Error(ErrorCode::kTooFewEmbeddedWords, "no hierarchy edge could be judged");
  }
  // edge_list order (descending psi) is preserved by binarization.
  judgments = binarize_judgments(std::move(judgments), percentile);
  const auto flags = std::make_unique<bool[]>(judgments.size());
  for (std::size_t i = 0; i < judgments.size(); ++i) flags[i] = judgments[i].relevant;
  const std::span<const bool> ranked(flags.get(), judgments.size());
  for (const auto k : k_list) {
    out.ap.emplace_back(k, average_precision_at_k(ranked, k));
  }
  return out;
}

StrategyRow evaluate_strategy(const HierarchicalModel& initial_model,
                              const AggregationResult& result,
                              const EmbeddingTable& table,
                              const AblationOptions& options) {
  StrategyRow row;
  row.strategy = result.strategy;
  row.label = result.strategy.label();
  const auto& model = result.model;
  row.level1_quality = level_quality(model.level1, table, options.top_k).value;
  row.level2_quality = level_quality(model.level2, table, options.top_k).value;
  const auto eq = edge_quality(model, table, options.k_list, options.top_k,
                               options.percentile);
  row.ap = eq.ap;
  row.judged_edges = eq.judged;
  row.unjudged_edges = eq.unjudged;
  const auto edges = edge_list(model, true);
  row.edge_curve = count_edges(edges, options.tau_grid);

  for (const auto t : initial_model.level1.subject_topics()) {
    if (t >= model.level1.num_topics()) break;
    const auto before = top_tokens(initial_model.level1, t, 10);
    const auto after = top_tokens(model.level1, t, 10);
    const std::set<std::string> a(before.begin(), before.end());
    std::size_t shared = 0;
    for (const auto& w : after) shared += a.count(w);
    row.initial_topic_overlap.push_back(static_cast<double>(shared) /
                                        static_cast<double>(before.size()));
  }
  return row;
}

AblationReport ablation_report(const HierarchicalModel& initial_model,
                               const Corpus& initial_corpus,
                               const Corpus& added_corpus,
                               std::span<const Strategy> strategies,
                               const EmbeddingTable& table,
                               const HierarchyConfig& config,
                               const AblationOptions& options) {
  AblationReport report;
  report.k_list = options.k_list;
  report.provenance = {
      {"config", to_json(config)},
      {"coherence", "mean pairwise cosine of top-k word embeddings x 100"},
      {"edge_relevance", "mean cross-pair cosine of parent/child top-k words"},
      {"binarization", "similarity >= nearest-rank percentile"},
      {"percentile", options.percentile},
      {"ap_normalization", "min(k, R)"},
      {"top_k", options.top_k},
      {"initial_documents", initial_corpus.size()},
      {"added_documents", added_corpus.size()},
  };

  auto run = [&](const Strategy& s) {
    try {
      const auto result = aggregate(initial_model, initial_corpus, added_corpus, s, config);
      return evaluate_strategy(initial_model, result, table, options);
    } catch (const std::exception& e) {
      StrategyRow row;
      row.strategy = s;
      row.label = s.label();
      row.failed = true;
      row.error = e.what();
      return row;
    }
  };

  if (options.parallel && strategies.size() > 1) {
    std::vector<std::future<StrategyRow>> futures;
    for (const auto& s : strategies) {
      futures.push_back(std::async(std::launch::async, run, s));
    }
    for (auto& f : futures) report.rows.push_back(f.get());
  } else {
    for (const auto& s : strategies) report.rows.push_back(run(s));
  }
  return report;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r{{"strategy", row.strategy.name()},
                     {"label", row.label},
                     {"failed", row.failed}};
    if (row.failed) {
      r["error"] = row.error;
    } else {
      r["level1_quality"] = row.level1_quality;
      r["level2_quality"] = row.level2_quality;
      nlohmann::json ap = nlohmann::json::object();
      for (const auto& [k, v] : row.ap) ap["AP@" + std::to_string(k)] = v;
      r["ap"] = ap;
      r["judged_edges"] = row.judged_edges;
      r["unjudged_edges"] = row.unjudged_edges;
      nlohmann::json curve = nlohmann::json::array();
      for (const auto& [tau, n] : row.edge_curve) curve.push_back({tau, n});
      r["n_tau"] = curve;
      r["initial_topic_overlap"] = row.initial_topic_overlap;
    }
    rows_json.push_back(std::move(r));
  }
  return {{"rows", rows_json}, {"k_list", k_list}, {"provenance", provenance}};
}

std::string AblationReport::to_text() const {
  std::vector<std::string> header{"", "level 1", "level 2"};
  for (const auto k : k_list) header.push_back("AP@" + std::to_string(k));
  std::vector<std::vector<std::string>> table{header};
  for (const auto& row : rows) {
    std::vector<std::string> cells{row.label};
    if (row.failed) {
      cells.push_back("failed: " + row.error);
    } else {
      cells.push_back(format_fixed(row.level1_quality));
      cells.push_back(format_fixed(row.level2_quality));
      for (const auto& [k, v] : row.ap) cells.push_back(format_fixed(v));
    }
    table.push_back(std::move(cells));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : table) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], utf8_length(r[c]));
    }
  }
  std::ostringstream out;
  for (const auto& r : table) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) out << " | ";
      const auto pad = c < width.size() ? width[c] - std::min(width[c], utf8_length(r[c])) : 0;
      if (c == 0) {
        out << r[c] << std::string(pad, ' ');
      } else {
        out << std::string(pad, ' ') << r[c];
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace topicmap

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

#include "topicmap/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "topicmap/persistence.hpp"

namespace topicmap {

namespace {

constexpr double kMinCellWeight = 1e-12;

std::vector<double> column_copy(const Eigen::MatrixXd& m, Eigen::Index col) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[r] = m(r, col);
  return out;
}

std::size_t argmax_over(std::span<const double> values,
                        std::span<const std::size_t> candidates) {
  std::size_t best = candidates.front();
  for (const auto c : candidates) {
    if (values[c] > values[best]) best = c;
  }
  return best;
}

std::vector<double> fold_in_level(const TopicModelLevel& level,
                                  const RegularizerConfig& reg,
                                  const Document& query,
                                  std::size_t iterations) {
  const auto t = static_cast<Eigen::Index>(level.num_topics());
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(t, 1.0 / static_cast<double>(t));
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(t);
  for (Eigen::Index k = 0; k < t; ++k) {
    if (level.roles[k] == TopicRole::kBackground) alpha[k] = reg.smooth_alpha;
  }
  Eigen::VectorXd n_t(t);
  Eigen::VectorXd p(t);
  for (std::size_t it = 0; it < iterations; ++it) {
    n_t.setZero();
    double processed = 0.0;
    double skipped = 0.0;
    for (const auto& tc : query.counts) {
      p = level.phi.row(tc.word).transpose().cwiseProduct(theta);
      const double denom = p.sum();
      if (!(denom > 0.0)) {
        skipped += tc.count;
        continue;
      }
      processed += tc.count;
      n_t += p * (tc.count / denom);
    }
    if (processed == 0.0) {
      throw Error(ErrorCode::kQueryEmptyAfterProjection,
                  "no query token has probability under the model");
    }
    if (skipped > kMaxSkippedFraction * (processed + skipped)) {
      throw Error(ErrorCode::kZeroDenominator,
                  "too many query tokens have zero probability");
    }
    theta = (n_t + alpha).cwiseMax(0.0);
    const double sum = theta.sum();
    if (sum > 0.0) {
      theta /= sum;
    } else {
      theta.setConstant(1.0 / static_cast<double>(t));
    }
  }
  return std::vector<double>(theta.data(), theta.data() + t);
}

}  // namespace

SearchIndex::SearchIndex(std::vector<DocumentProfile> profiles,
                         std::uint64_t model_hash)
    : profiles_(std::move(profiles)), model_hash_(model_hash) {
  for (std::size_t i = 0; i < profiles_.size(); ++i) {
    if (!by_id_.emplace(profiles_[i].doc_id, i).second) {
      throw Error(ErrorCode::kDuplicateDocId,
                  "duplicate profile '" + profiles_[i].doc_id + "'");
    }
  }
}

const DocumentProfile* SearchIndex::find(std::string_view doc_id) const {
  const auto it = by_id_.find(std::string(doc_id));
  return it == by_id_.end() ? nullptr : &profiles_[it->second];
}

std::string make_snippet(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  std::size_t chars = 0;
  while (pos < text.size() && chars < kSnippetLength) {
    // Copy one UTF-8 sequence: lead byte plus its continuation bytes.
    std::size_t next = pos + 1;
    while (next < text.size() &&
           (static_cast<unsigned char>(text[next]) & 0xC0) == 0x80) {
      ++next;
    }
    out.append(text.substr(pos, next - pos));
    pos = next;
    ++chars;
  }
  return out;
}

std::string token_snippet(const Document& doc, const Vocabulary& vocabulary) {
  std::vector<TermCount> terms = doc.counts;
  std::stable_sort(terms.begin(), terms.end(),
                   [](const TermCount& a, const TermCount& b) {
                     return a.count > b.count;
                   });
  std::string text;
  for (const auto& tc : terms) {
    if (!text.empty()) text.push_back(' ');
    text += vocabulary.token(tc.word);
    if (utf8_length(text) >= kSnippetLength) break;
  }
  return make_snippet(text);
}

SearchIndex build_index(const HierarchicalModel& model, const Corpus& corpus,
                        const std::unordered_map<std::string, std::string>& titles) {
  std::unordered_map<std::string, Eigen::Index> col1;
  std::unordered_map<std::string, Eigen::Index> col2;
  for (std::size_t i = 0; i < model.level1.doc_ids.size(); ++i) {
    col1.emplace(model.level1.doc_ids[i], static_cast<Eigen::Index>(i));
  }
  for (std::size_t i = 0; i < model.level2.doc_ids.size(); ++i) {
    col2.emplace(model.level2.doc_ids[i], static_cast<Eigen::Index>(i));
  }
  std::vector<DocumentProfile> profiles;
  profiles.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    if (is_pseudo_document(doc)) continue;
    const auto c1 = col1.find(doc.id);
    const auto c2 = col2.find(doc.id);
    if (c1 == col1.end() || c2 == col2.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "document '" + doc.id + "' was not part of model training");
    }
    DocumentProfile profile;
    profile.doc_id = doc.id;
    profile.source = doc.source;
    profile.level1_dist = column_copy(model.level1.theta, c1->second);
    profile.level2_dist = column_copy(model.level2.theta, c2->second);
    const auto title = titles.find(doc.id);
    profile.title_snippet = title != titles.end()
                                ? make_snippet(title->second)
                                : token_snippet(doc, corpus.vocabulary);
    profiles.push_back(std::move(profile));
  }
  return SearchIndex(std::move(profiles), model_hash(model));
}

LevelDistributions fold_in(const HierarchicalModel& model,
                           const Document& query, std::size_t iterations) {
  if (query.counts.empty()) {
    throw Error(ErrorCode::kQueryEmptyAfterProjection,
                "query has no in-vocabulary tokens");
  }
  for (const auto& tc : query.counts) {
    if (tc.word >= model.level1.num_words()) {
      throw Error(ErrorCode::kVocabularyMismatch,
                  "query is not indexed against the model vocabulary");
    }
  }
  return {fold_in_level(model.level1, model.config.reg1, query, iterations),
          fold_in_level(model.level2, model.config.reg2, query, iterations)};
}

Document make_query_document(const HierarchicalModel& model,
                             std::string_view text) {
  TokenizerConfig tokenizer;
  tokenizer.min_len = 1;
  std::map<WordId, double> counts;
  for (const auto& token : tokenize(text, tokenizer)) {
    if (const auto id = model.level1.vocabulary.find(token)) counts[*id] += 1.0;
  }
  if (counts.empty()) {
    throw Error(ErrorCode::kQueryEmptyAfterProjection,
                "no recognizable terms in the query");
  }
  Document doc;
  doc.id = "_query";
  doc.source = "_query";
  for (const auto& [word, count] : counts) doc.counts.push_back({word, count});
  return doc;
}

double hellinger(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "hellinger distance needs equally sized vectors");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double diff = std::sqrt(std::max(p[i], 0.0)) - std::sqrt(std::max(q[i], 0.0));
    sum += diff * diff;
  }
  return std::clamp(std::sqrt(sum / 2.0), 0.0, 1.0);
}

std::vector<SearchHit> rank_profiles(const SearchIndex& index,
                                     const LevelDistributions& query,
                                     std::size_t top_n,
                                     const std::vector<std::size_t>& matched) {
  if (top_n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "top_n must be at least 1");
  }
  auto joint = [](const std::vector<double>& l1, const std::vector<double>& l2) {
    std::vector<double> out;
    out.reserve(l1.size() + l2.size());
    for (double v : l1) out.push_back(v / 2.0);
    for (double v : l2) out.push_back(v / 2.0);
    return out;
  };
  const auto q = joint(query.level1, query.level2);

  std::vector<std::pair<double, const DocumentProfile*>> scored;
  scored.reserve(index.size());
  for (const auto& profile : index.profiles()) {
    const auto d = joint(profile.level1_dist, profile.level2_dist);
    scored.emplace_back(1.0 - hellinger(q, d), &profile);
  }
  const auto take = std::min(top_n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second->doc_id < b.second->doc_id;
                    });
  std::vector<SearchHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    hits.push_back({scored[i].second->doc_id, scored[i].first, i + 1, matched});
  }
  return hits;
}

std::vector<SearchHit> search(const SearchIndex& index,
                              const HierarchicalModel& model,
                              std::string_view query_text, std::size_t top_n) {
  if (top_n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "top_n must be at least 1");
  }
  const auto query = make_query_document(model, query_text);
  const auto dists = fold_in(model, query);
  auto subjects = model.level2.subject_topics();
  std::stable_sort(subjects.begin(), subjects.end(), [&](std::size_t a, std::size_t b) {
    return dists.level2[a] > dists.level2[b];
  });
  subjects.resize(std::min<std::size_t>(3, subjects.size()));
  return rank_profiles(index, dists, top_n, subjects);
}

std::string_view map_node_kind_name(MapNodeKind kind) {
  switch (kind) {
    case MapNodeKind::kRoot: return "root";
    case MapNodeKind::kTopic: return "topic";
    case MapNodeKind::kSubtopic: return "subtopic";
    case MapNodeKind::kDocument: return "document";
    case MapNodeKind::kMore: return "more";
  }
  return "unknown";
}

std::string topic_label(const TopicModelLevel& level, std::size_t topic) {
  std::string label;
  for (const auto& [word, p] : top_words(level, topic, 3)) {
    if (!label.empty()) label += ", ";
    label += word;
  }
  return label;
}

MapLayout layout_map(const HierarchicalModel& model, const SearchIndex& index,
                     double edge_tau) {
  const auto parents = model.level1.subject_topics();
  const auto children = model.level2.subject_topics();
  MapLayout layout;
  layout.parents_of.resize(model.level2.num_topics());
  std::vector<std::size_t> fallback(model.level2.num_topics(), 0);
  for (const auto a : children) {
    const auto row = static_cast<Eigen::Index>(a);
    std::size_t best = parents.front();
    for (const auto t : parents) {
      const double w = model.psi(row, static_cast<Eigen::Index>(t));
      if (w >= edge_tau) layout.parents_of[a].push_back(t);
      if (w > model.psi(row, static_cast<Eigen::Index>(best))) best = t;
    }
    fallback[a] = best;
    if (layout.parents_of[a].empty()) layout.parents_of[a].push_back(best);
  }

  layout.placements.reserve(index.size());
  for (const auto& profile : index.profiles()) {
    const auto a = argmax_over(profile.level2_dist, children);
    const auto& candidates = layout.parents_of[a];
    const auto t = candidates.empty() ? fallback[a]
                                      : argmax_over(profile.level1_dist, candidates);
    layout.placements.push_back({t, a});
  }
  return layout;
}

std::vector<const DocumentProfile*> subtopic_documents(const SearchIndex& index,
                                                       const MapLayout& layout,
                                                       std::size_t parent,
                                                       std::size_t child) {
  std::vector<const DocumentProfile*> docs;
  for (std::size_t i = 0; i < layout.placements.size(); ++i) {
    const auto& pl = layout.placements[i];
    if (pl.parent == parent && pl.child == child) {
      docs.push_back(&index.profiles()[i]);
    }
  }
  std::sort(docs.begin(), docs.end(), [child](const auto* x, const auto* y) {
    if (x->level2_dist[child] != y->level2_dist[child]) {
      return x->level2_dist[child] > y->level2_dist[child];
    }
    return x->doc_id < y->doc_id;
  });
  return docs;
}

std::string subtopic_node_id(std::size_t parent, std::size_t child) {
  return "subtopic:" + std::to_string(parent) + ":" + std::to_string(child);
}

MapNode build_map(const HierarchicalModel& model, const SearchIndex& index,
                  const MapOptions& options) {
  const auto layout = layout_map(model, index, options.edge_tau);
  const auto parents = model.level1.subject_topics();
  const auto children = model.level2.subject_topics();

  double subject_mass = 0.0;
  for (const auto t : parents) subject_mass += model.level1.n_t[static_cast<Eigen::Index>(t)];

  MapNode root;
  root.kind = MapNodeKind::kRoot;
  root.id = "root";
  root.weight = 1.0;
  for (const auto t : parents) {
    MapNode topic;
    topic.kind = MapNodeKind::kTopic;
    topic.id = "topic:" + std::to_string(t);
    topic.label = topic_label(model.level1, t);
    const double mass = model.level1.n_t[static_cast<Eigen::Index>(t)];
    topic.weight = std::max(subject_mass > 0.0 ? mass / subject_mass : 0.0,
                            kMinCellWeight);

    std::vector<std::size_t> attached;
    for (const auto a : children) {
      const auto& ps = layout.parents_of[a];
      if (std::find(ps.begin(), ps.end(), t) != ps.end()) attached.push_back(a);
    }
    std::stable_sort(attached.begin(), attached.end(), [&](std::size_t x, std::size_t y) {
      return model.psi(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(t)) >
             model.psi(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(t));
    });

    for (const auto a : attached) {
      MapNode sub;
      sub.kind = MapNodeKind::kSubtopic;
      sub.id = subtopic_node_id(t, a);
      sub.label = topic_label(model.level2, a);
      sub.weight = std::max(
          model.psi(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(t)),
          kMinCellWeight);
      const auto docs = subtopic_documents(index, layout, t, a);
      const auto shown = std::min(docs.size(), options.docs_per_cell);
      for (std::size_t i = 0; i < shown; ++i) {
        MapNode leaf;
        leaf.kind = MapNodeKind::kDocument;
        leaf.id = "doc:" + docs[i]->doc_id;
        leaf.label = docs[i]->title_snippet;
        leaf.weight = std::max(docs[i]->level2_dist[a], kMinCellWeight);
        sub.children.push_back(std::move(leaf));
      }
      if (docs.size() > shown) {
        MapNode more;
        more.kind = MapNodeKind::kMore;
        more.id = "more:" + std::to_string(t) + ":" + std::to_string(a);
        more.label = "(...)";
        double rest = 0.0;
        for (std::size_t i = shown; i < docs.size(); ++i) rest += docs[i]->level2_dist[a];
        more.weight = std::max(rest, kMinCellWeight);
        sub.children.push_back(std::move(more));
      }
      topic.children.push_back(std::move(sub));
    }
    root.children.push_back(std::move(topic));
  }
  return root;
}

}  // namespace topicmap

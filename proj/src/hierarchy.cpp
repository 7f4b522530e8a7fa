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

#include "topicmap/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_set>

namespace topicmap {

void HierarchyConfig::validate() const {
  level1.validate();
  level2.validate();
  reg1.validate();
  reg2.validate();
  if (!(pseudo_doc_weight > 0.0) || !std::isfinite(pseudo_doc_weight)) {
    throw Error(ErrorCode::kInvalidArgument,
                "pseudo_doc_weight must be a positive real");
  }
  if (schedule.max_passes == 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_passes must be positive");
  }
}

void HierarchicalModel::validate(double tol) const {
  level1.validate(tol);
  level2.validate(tol);
  if (level1.num_topics() != config.level1.total() ||
      level2.num_topics() != config.level2.total()) {
    throw Error(ErrorCode::kInvalidArgument,
                "topic counts do not match the hierarchy config");
  }
  if (static_cast<std::size_t>(psi.rows()) != level2.num_topics() ||
      static_cast<std::size_t>(psi.cols()) != level1.num_topics()) {
    throw Error(ErrorCode::kInvalidArgument, "psi has the wrong shape");
  }
  for (Eigen::Index t = 0; t < psi.cols(); ++t) {
    const auto col = psi.col(t);
    if ((col.array() < 0.0).any() || std::abs(col.sum() - 1.0) > tol) {
      throw Error(ErrorCode::kInvalidArgument,
                  "psi column " + std::to_string(t) + " is not a distribution");
    }
  }
}

std::string pseudo_document_id(std::size_t parent) {
  return "_parent_" + std::to_string(parent);
}

bool is_pseudo_document(const Document& doc) {
  return doc.source == kPseudoSource;
}

std::vector<Document> build_pseudo_documents(const TopicModelLevel& level1,
                                             double pseudo_doc_weight) {
  if (!(pseudo_doc_weight > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "pseudo_doc_weight must be a positive real");
  }
  std::vector<Document> docs;
  docs.reserve(level1.num_topics());
  for (std::size_t t = 0; t < level1.num_topics(); ++t) {
    Document doc;
    doc.id = pseudo_document_id(t);
    doc.source = std::string(kPseudoSource);
    const double mass = pseudo_doc_weight * level1.n_t[static_cast<Eigen::Index>(t)];
    const auto column = level1.phi.col(static_cast<Eigen::Index>(t));
    for (Eigen::Index w = 0; w < column.size(); ++w) {
      const double count = mass * column[w];
      if (count > 0.0) doc.counts.push_back({static_cast<WordId>(w), count});
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

namespace {

std::vector<Document> with_pseudo_documents(const TopicModelLevel& level1,
                                            std::span<const Document> docs,
                                            double weight) {
  std::vector<Document> all(docs.begin(), docs.end());
  std::unordered_set<std::string> ids;
  for (const auto& doc : all) ids.insert(doc.id);
  for (auto& pseudo : build_pseudo_documents(level1, weight)) {
    if (ids.contains(pseudo.id)) {
      throw Error(ErrorCode::kDuplicateDocId,
                  "document id '" + pseudo.id + "' is reserved for pseudo-documents");
    }
    all.push_back(std::move(pseudo));
  }
  return all;
}

}  // namespace

HierarchicalModel fit_child_level(TopicModelLevel level1,
                                  std::span<const Document> docs,
                                  const HierarchyConfig& config,
                                  TopicModelLevel level2_start,
                                  HierarchyFitReport* report) {
  config.validate();
  if (level1.num_topics() != config.level1.total() ||
      level2_start.num_topics() != config.level2.total()) {
    throw Error(ErrorCode::kInvalidArgument,
                "topic levels do not match the hierarchy config");
  }
  if (!(level2_start.vocabulary == level1.vocabulary)) {
    throw Error(ErrorCode::kVocabularyMismatch,
                "both levels must share one vocabulary");
  }
  const auto all = with_pseudo_documents(level1, docs, config.pseudo_doc_weight);
  auto fitted = fit(std::move(level2_start), all, config.schedule, config.reg2);
  if (report) report->level2_trace = fitted.perplexity_trace;

  HierarchicalModel model;
  const auto t1 = static_cast<Eigen::Index>(level1.num_topics());
  model.psi = fitted.model.theta.rightCols(t1);
  model.level1 = std::move(level1);
  model.level2 = std::move(fitted.model);
  model.config = config;
  return model;
}

HierarchicalModel fit_child_level(TopicModelLevel level1,
                                  std::span<const Document> docs,
                                  const HierarchyConfig& config,
                                  const std::optional<InitMode>& level2_init,
                                  HierarchyFitReport* report) {
  config.validate();
  const InitMode init = level2_init.value_or(RandomInit{config.level2.seed});
  auto level2 = init_model(level1.vocabulary, config.level2, init);
  return fit_child_level(std::move(level1), docs, config, std::move(level2),
                         report);
}

HierarchicalModel train_hierarchy(const Corpus& corpus,
                                  const HierarchyConfig& config,
                                  HierarchyFitReport* report) {
  config.validate();
  auto level1 = init_model(corpus.vocabulary, config.level1,
                           RandomInit{config.level1.seed});
  auto fitted = fit(std::move(level1), corpus.documents, config.schedule,
                    config.reg1);
  if (report) report->level1_trace = fitted.perplexity_trace;
  return fit_child_level(std::move(fitted.model), corpus.documents, config,
                         std::nullopt, report);
}

std::vector<Edge> edge_list(const HierarchicalModel& model, bool subject_only) {
  std::vector<Edge> edges;
  const auto& roles1 = model.level1.roles;
  const auto& roles2 = model.level2.roles;
  for (std::size_t t = 0; t < roles1.size(); ++t) {
    if (subject_only && roles1[t] != TopicRole::kSubject) continue;
    for (std::size_t a = 0; a < roles2.size(); ++a) {
      if (subject_only && roles2[a] != TopicRole::kSubject) continue;
      edges.push_back({t, a,
                       model.psi(static_cast<Eigen::Index>(a),
                                 static_cast<Eigen::Index>(t))});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.weight != y.weight) return x.weight > y.weight;
    if (x.parent != y.parent) return x.parent < y.parent;
    return x.child < y.child;
  });
  return edges;
}

std::vector<std::pair<double, std::size_t>> count_edges(
    std::span<const Edge> edges, std::span<const double> tau_grid) {
  if (!std::is_sorted(tau_grid.begin(), tau_grid.end())) {
    throw Error(ErrorCode::kInvalidArgument, "tau grid must be ascending");
  }
  std::vector<double> weights;
  weights.reserve(edges.size());
  for (const auto& e : edges) weights.push_back(e.weight);
  std::sort(weights.begin(), weights.end());
  std::vector<std::pair<double, std::size_t>> curve;
  curve.reserve(tau_grid.size());
  for (const double tau : tau_grid) {
    const auto first = std::lower_bound(weights.begin(), weights.end(), tau);
    curve.emplace_back(tau, static_cast<std::size_t>(weights.end() - first));
  }
  return curve;
}

std::vector<double> default_tau_grid() {
  std::vector<double> grid;
  grid.reserve(101);
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

void write_edge_curve_csv(std::ostream& out,
                          std::span<const std::pair<double, std::size_t>> curve) {
  out << "tau,n_tau\n";
  for (const auto& [tau, n] : curve) out << tau << ',' << n << '\n';
}

}  // namespace topicmap

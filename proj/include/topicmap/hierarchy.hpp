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

// Two-level hierarchical topic model. The child level is trained on the
// corpus plus one pseudo-document per parent topic (counts n_t * phi_wt);
// the child-level theta columns of those pseudo-documents form
// psi[child][parent] = p(child | parent).

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "topicmap/artm.hpp"
#include "topicmap/corpus.hpp"

namespace topicmap {

struct HierarchyConfig {
  TopicConfig level1{20, 1, 1};
  TopicConfig level2{60, 1, 2};
  double pseudo_doc_weight = 1.0;
  RegularizerConfig reg1;
  RegularizerConfig reg2;
  FitSchedule schedule;

  void validate() const;
  bool operator==(const HierarchyConfig&) const = default;
};

struct HierarchicalModel {
  TopicModelLevel level1;
  // Its theta also holds the pseudo-document columns (ids "_parent_<t>").
  TopicModelLevel level2;
  Eigen::MatrixXd psi;  // T2 x T1
  HierarchyConfig config;

  void validate(double tol = 1e-6) const;
};

struct Edge {
  std::size_t parent;
  std::size_t child;
  double weight;

  bool operator==(const Edge&) const = default;
};

inline constexpr std::string_view kPseudoSource = "_pseudo";
std::string pseudo_document_id(std::size_t parent);
bool is_pseudo_document(const Document& doc);

std::vector<Document> build_pseudo_documents(const TopicModelLevel& level1,
                                             double pseudo_doc_weight);

struct HierarchyFitReport {
  std::vector<double> level1_trace;
  std::vector<double> level2_trace;
};

// Trains the child level on `docs` + pseudo-documents of `level1`, starting
// from `level2_init` (random with config.level2.seed when unset).
HierarchicalModel fit_child_level(
    TopicModelLevel level1, std::span<const Document> docs,
    const HierarchyConfig& config,
    const std::optional<InitMode>& level2_init = std::nullopt,
    HierarchyFitReport* report = nullptr);

// Same, starting from an already initialized child level.
HierarchicalModel fit_child_level(TopicModelLevel level1,
                                  std::span<const Document> docs,
                                  const HierarchyConfig& config,
                                  TopicModelLevel level2_start,
                                  HierarchyFitReport* report = nullptr);

// Random-init training of both levels on `corpus`.
HierarchicalModel train_hierarchy(const Corpus& corpus,
                                  const HierarchyConfig& config,
                                  HierarchyFitReport* report = nullptr);

// Edges sorted by descending weight, ties by (parent, child).
std::vector<Edge> edge_list(const HierarchicalModel& model, bool subject_only);

// n_tau = #{edges : weight >= tau} for each grid point (ascending grid).
std::vector<std::pair<double, std::size_t>> count_edges(
    std::span<const Edge> edges, std::span<const double> tau_grid);

// 0.00, 0.01, ..., 1.00
std::vector<double> default_tau_grid();

// CSV with header "tau,n_tau".
void write_edge_curve_csv(std::ostream& out,
                          std::span<const std::pair<double, std::size_t>> curve);

}  // namespace topicmap

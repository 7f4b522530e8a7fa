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

// Merging an added document collection into an existing hierarchical model.
//
// A strategy combines two switches:
//   D+ / D-   fixed vocabulary (added-only words become stopwords) or union
//   I- / I+   random re-initialization or warm start from the initial model
//   I+-       warm start applied over batches of gradually increasing size,
//             each at most cap * (merged size of the previous round)

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topicmap/corpus.hpp"
#include "topicmap/hierarchy.hpp"

namespace topicmap {

enum class Initialization { kNone, kWarm, kIterative };

struct Strategy {
  bool fixed_vocabulary = false;
  Initialization initialization = Initialization::kNone;
  double batch_cap_fraction = 0.10;

  // "D-I-", "D+I-", "D-I+", "D+I+", "D+I+-", "D-I+-".
  std::string name() const;
  // Row label of the ablation table.
  std::string label() const;

  bool operator==(const Strategy&) const = default;
};

// Accepts the six combination names (spaces ignored) and the aliases
// "baseline" (D-I-) and "proposed" (D+I+). Throws kInvalidArgument.
Strategy parse_strategy(std::string_view name);

// The six combinations in ablation-table order.
std::vector<Strategy> all_strategies();

// b_1 = floor(cap * initial), b_{i+1} = floor(cap * merged_i), last batch
// clipped to what remains, every batch at least 1.
std::vector<std::size_t> batch_schedule(std::size_t initial_size,
                                        std::size_t added_size, double cap);

struct AggregationResult {
  HierarchicalModel model;
  Corpus merged_corpus;
  std::size_t dropped_documents = 0;
  std::vector<std::size_t> batch_sizes;  // iterative strategies only
  Strategy strategy;
  // Strategy, seeds and config snapshot as JSON text.
  std::string provenance;
};

// Observation points for tests and diagnostics; all optional.
struct AggregationHooks {
  // Called with each freshly initialized level (1 or 2) before its first EM
  // pass, once per training round.
  std::function<void(int level, const TopicModelLevel&)> on_initialized;
  std::function<void(std::size_t round, const Corpus&)> on_round;
};

AggregationResult aggregate(const HierarchicalModel& initial_model,
                            const Corpus& initial_corpus,
                            const Corpus& added_corpus,
                            const Strategy& strategy,
                            const HierarchyConfig& config,
                            const AggregationHooks& hooks = {});

}  // namespace topicmap

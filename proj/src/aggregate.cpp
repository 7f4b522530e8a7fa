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

#include "topicmap/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "topicmap/persistence.hpp"

namespace topicmap {

std::string Strategy::name() const {
  std::string out = fixed_vocabulary ? "D+" : "D-";
  switch (initialization) {
    case Initialization::kNone: return out + "I-";
    case Initialization::kWarm: return out + "I+";
    case Initialization::kIterative: return out + "I+-";
  }
  return out;
}

std::string Strategy::label() const {
  if (initialization == Initialization::kNone) {
    return fixed_vocabulary ? "No init, fixed vocab"
                            : "No init, no fixed vocab (Baseline)";
  }
  if (initialization == Initialization::kWarm) {
    return fixed_vocabulary ? "Init, fixed vocab (Proposed)"
                            : "Init, no fixed vocab";
  }
  return fixed_vocabulary ? "Iterative init, fixed vocab"
                          : "Iterative init, no fixed vocab";
}

Strategy parse_strategy(std::string_view name) {
  std::string compact;
  for (char c : name) {
    if (c != ' ') compact.push_back(c);
  }
  if (compact == "baseline") compact = "D-I-";
  if (compact == "proposed") compact = "D+I+";
  for (const auto& s : all_strategies()) {
    if (s.name() == compact) return s;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown strategy '" + std::string(name) +
                  "' (expected D-I-, D+I-, D-I+, D+I+, D+I+-, D-I+-, "
                  "baseline or proposed)");
}

std::vector<Strategy> all_strategies() {
  return {
      {false, Initialization::kNone},      {true, Initialization::kNone},
      {false, Initialization::kWarm},      {false, Initialization::kIterative},
      {true, Initialization::kIterative},  {true, Initialization::kWarm},
  };
}

std::vector<std::size_t> batch_schedule(std::size_t initial_size,
                                        std::size_t added_size, double cap) {
  if (!(cap > 0.0 && cap <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "batch cap must lie in (0, 1]");
  }
  if (initial_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "initial collection is empty");
  }
  std::vector<std::size_t> batches;
  std::size_t merged = initial_size;
  std::size_t remaining = added_size;
  while (remaining > 0) {
    auto b = static_cast<std::size_t>(std::floor(cap * static_cast<double>(merged)));
    b = std::clamp<std::size_t>(b, 1, remaining);
    batches.push_back(b);
    merged += b;
    remaining -= b;
  }
  return batches;
}

namespace {

// Initializes and fits both levels on `corpus`.
HierarchicalModel train_round(const Corpus& corpus,
                              const HierarchyConfig& config,
                              const InitMode& init1, const InitMode& init2,
                              const AggregationHooks& hooks) {
  auto level1 = init_model(corpus.vocabulary, config.level1, init1);
  if (hooks.on_initialized) hooks.on_initialized(1, level1);
  auto fitted = fit(std::move(level1), corpus.documents, config.schedule,
                    config.reg1);
  auto level2 = init_model(corpus.vocabulary, config.level2, init2);
  if (hooks.on_initialized) hooks.on_initialized(2, level2);
  return fit_child_level(std::move(fitted.model), corpus.documents, config,
                         std::move(level2));
}

Corpus slice(const Corpus& corpus, std::size_t begin, std::size_t count) {
  Corpus out;
  out.vocabulary = corpus.vocabulary;
  out.documents.assign(corpus.documents.begin() + static_cast<std::ptrdiff_t>(begin),
                       corpus.documents.begin() +
                           static_cast<std::ptrdiff_t>(begin + count));
  for (const auto& doc : out.documents) out.source_tags.insert(doc.source);
  return out;
}

}  // namespace

AggregationResult aggregate(const HierarchicalModel& initial_model,
                            const Corpus& initial_corpus,
                            const Corpus& added_corpus,
                            const Strategy& strategy,
                            const HierarchyConfig& config,
                            const AggregationHooks& hooks) {
  config.validate();
  if (added_corpus.documents.empty()) {
    throw Error(ErrorCode::kScheduleEmpty, "the added collection is empty");
  }
  if (!(initial_corpus.vocabulary == initial_model.level1.vocabulary)) {
    throw Error(ErrorCode::kVocabularyMismatch,
                "initial corpus is not indexed against the initial model "
                "vocabulary");
  }
  if (initial_model.level1.num_topics() != config.level1.total() ||
      initial_model.level2.num_topics() != config.level2.total()) {
    throw Error(ErrorCode::kInvalidArgument,
                "initial model topic counts differ from the config");
  }
  const auto policy =
      strategy.fixed_vocabulary ? VocabPolicy::kKeepInitial : VocabPolicy::kUnion;

  AggregationResult result;
  result.strategy = strategy;

  if (strategy.initialization != Initialization::kIterative) {
    auto merged = merge_corpora(initial_corpus, added_corpus, policy);
    result.dropped_documents = merged.dropped_documents;
    if (hooks.on_round) hooks.on_round(1, merged.corpus);
    if (strategy.initialization == Initialization::kNone) {
      result.model = train_round(merged.corpus, config,
                                 RandomInit{config.level1.seed},
                                 RandomInit{config.level2.seed}, hooks);
    } else {
      result.model = train_round(merged.corpus, config,
                                 WarmStart{&initial_model.level1},
                                 WarmStart{&initial_model.level2}, hooks);
    }
    result.merged_corpus = std::move(merged.corpus);
  } else {
    Corpus added = added_corpus;
    if (strategy.fixed_vocabulary) {
      auto projected = project_corpus(added_corpus, initial_corpus.vocabulary);
      result.dropped_documents = projected.dropped_ids.size();
      added = std::move(projected.corpus);
    }
    if (added.documents.empty()) {
      throw Error(ErrorCode::kScheduleEmpty,
                  "every added document was dropped by the fixed vocabulary");
    }
    result.batch_sizes = batch_schedule(initial_corpus.size(), added.size(),
                                        strategy.batch_cap_fraction);

    Corpus current = initial_corpus;
    const HierarchicalModel* previous = &initial_model;
    HierarchicalModel round_model;
    std::size_t offset = 0;
    for (std::size_t round = 0; round < result.batch_sizes.size(); ++round) {
      const auto size = result.batch_sizes[round];
      // Only the tokens this batch uses join the vocabulary, so every round's
      // vocabulary is an index prefix of the next one.
      auto batch = compact_vocabulary(slice(added, offset, size));
      offset += size;
      current = merge_corpora(current, batch, policy).corpus;
      if (hooks.on_round) hooks.on_round(round + 1, current);
      round_model = train_round(current, config, WarmStart{&previous->level1},
                                WarmStart{&previous->level2}, hooks);
      previous = &round_model;
    }
    result.model = std::move(round_model);
    result.merged_corpus = std::move(current);
  }

  nlohmann::json provenance;
  provenance["strategy"] = strategy.name();
  provenance["label"] = strategy.label();
  provenance["batch_cap_fraction"] = strategy.batch_cap_fraction;
  provenance["config"] = to_json(config);
  provenance["seeds"] = {{"level1", config.level1.seed},
                         {"level2", config.level2.seed}};
  provenance["initial_documents"] = initial_corpus.size();
  provenance["added_documents"] = added_corpus.size();
  provenance["merged_documents"] = result.merged_corpus.size();
  provenance["dropped_documents"] = result.dropped_documents;
  provenance["batch_sizes"] = result.batch_sizes;
  provenance["vocabulary_size"] = result.merged_corpus.vocabulary.size();
  result.provenance = provenance.dump(2);
  return result;
}

}  // namespace topicmap

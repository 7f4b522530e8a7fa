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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "support/synthetic.hpp"
#include "topicmap/error.hpp"
#include "topicmap/persistence.hpp"

namespace topicmap {
namespace {

using testing::flat_fixture;
using testing::FlatFixture;
using testing::small_config;

double total_variation(const std::vector<double>& p, const Eigen::VectorXd& q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[Eigen::Index(i)]);
  return 0.5 * tv;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Trained small hierarchy over a well-separated flat fixture, shared by the
// tests that only read it.
class Trained : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fixture_ = new FlatFixture(flat_fixture(4, 25, 15, 200, 12));
    auto cfg = small_config(4, 8, 40);
    cfg.schedule.rel_tol = 1e-5;
    model_ = new HierarchicalModel(train_hierarchy(fixture_->sample.corpus, cfg));
    index_ = new SearchIndex(build_index(*model_, fixture_->sample.corpus));
  }
  static void TearDownTestSuite() {
    delete fixture_;
    delete model_;
    delete index_;
  }
  static const Corpus& corpus() { return fixture_->sample.corpus; }

  static FlatFixture* fixture_;
  static HierarchicalModel* model_;
  static SearchIndex* index_;
};
FlatFixture* Trained::fixture_ = nullptr;
HierarchicalModel* Trained::model_ = nullptr;
SearchIndex* Trained::index_ = nullptr;

TEST(FoldIn, SingleTopicModel) {
  const auto fx = flat_fixture(1, 10, 5, 20, 1);
  HierarchyConfig cfg = small_config(1, 1, 3);
  cfg.level1.n_background = 0;
  cfg.level2.n_background = 0;
  const auto model = train_hierarchy(fx.sample.corpus, cfg);
  const auto q = fold_in(model, fx.sample.corpus.documents[3]);
  EXPECT_EQ(q.level1, std::vector<double>{1.0});
  EXPECT_EQ(q.level2, std::vector<double>{1.0});
}

TEST_F(Trained, ZeroIterationsIsUniform) {
  const auto q = fold_in(*model_, corpus().documents[0], 0);
  for (const double p : q.level1) EXPECT_DOUBLE_EQ(p, 1.0 / 5.0);
  for (const double p : q.level2) EXPECT_DOUBLE_EQ(p, 1.0 / 9.0);
}

TEST_F(Trained, FoldInRecoversTrainedTheta) {
  for (std::size_t d = 0; d < corpus().size(); d += 17) {
    const auto q = fold_in(*model_, corpus().documents[d]);
    EXPECT_NEAR(sum(q.level1), 1.0, 1e-9);
    EXPECT_NEAR(sum(q.level2), 1.0, 1e-9);
    EXPECT_LE(total_variation(q.level1, model_->level1.theta.col(Eigen::Index(d))), 0.05)
        << corpus().documents[d].id;
  }
}

TEST_F(Trained, FoldInIsDeterministic) {
  const auto& doc = corpus().documents[7];
  const auto a = fold_in(*model_, doc);
  const auto b = fold_in(*model_, doc);
  EXPECT_EQ(a.level1, b.level1);
  EXPECT_EQ(a.level2, b.level2);
}

TEST_F(Trained, EmptyQuery) {
  for (const std::string text : {"", "   ", "zzzz qqqq unknownword"}) {
    try {
      search(*index_, *model_, text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kQueryEmptyAfterProjection);
    }
  }
}

TEST_F(Trained, IndexHoldsExactThetaCopies) {
  ASSERT_EQ(index_->size(), corpus().size());
  for (std::size_t d = 0; d < corpus().size(); ++d) {
    const auto* p = index_->find(corpus().documents[d].id);
    ASSERT_NE(p, nullptr);
    EXPECT_EQ(p->source, "initial");
    for (std::size_t t = 0; t < p->level1_dist.size(); ++t) {
      EXPECT_EQ(p->level1_dist[t], model_->level1.theta(Eigen::Index(t), Eigen::Index(d)));
    }
    // Level-2 theta columns follow the same document order.
    ASSERT_EQ(model_->level2.doc_ids[d], p->doc_id);
    for (std::size_t a = 0; a < p->level2_dist.size(); ++a) {
      EXPECT_EQ(p->level2_dist[a], model_->level2.theta(Eigen::Index(a), Eigen::Index(d)));
    }
    EXPECT_FALSE(p->title_snippet.empty());
  }
}

TEST_F(Trained, PseudoDocumentsAreNotIndexed) {
  // The level-2 model saw N real documents plus one pseudo-document per parent.
  EXPECT_EQ(model_->level2.doc_ids.size(), corpus().size() + 5);
  for (const auto& p : index_->profiles()) EXPECT_NE(p.doc_id.rfind("_parent_", 0), 0u);
}

TEST_F(Trained, IndexHashFollowsModel) {
  EXPECT_EQ(index_->model_hash(), model_hash(*model_));
  auto other = *model_;
  other.level1.phi(0, 0) += 1e-12;
  EXPECT_NE(model_hash(other), model_hash(*model_));
  EXPECT_NE(build_index(other, corpus()).model_hash(), index_->model_hash());
}

TEST_F(Trained, TitlesBecomeSnippets) {
  const std::string long_title(300, 'x');
  const auto idx = build_index(*model_, corpus(), {{corpus().documents[0].id, long_title}});
  EXPECT_EQ(idx.profiles()[0].title_snippet, std::string(kSnippetLength, 'x'));
}

TEST(Snippet, CountsCodePoints) {
  std::string text;
  for (int i = 0; i < 200; ++i) text += "ж";
  const auto s = make_snippet(text);
  EXPECT_EQ(utf8_length(s), kSnippetLength);
  EXPECT_EQ(make_snippet("short"), "short");
}

TEST_F(Trained, PlantedKeywordsFindPlantedDocuments) {
  for (std::size_t k = 0; k < fixture_->topics.size(); ++k) {
    std::string query;
    for (const auto& w : fixture_->topics[k].top(5)) query += w + " ";
    const auto hits = search(*index_, *model_, query, 10);
    ASSERT_EQ(hits.size(), 10u);
    std::size_t on_topic = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      EXPECT_EQ(hits[i].rank, i + 1);
      EXPECT_GE(hits[i].score, 0.0);
      EXPECT_LE(hits[i].score, 1.0);
      if (i > 0) EXPECT_LE(hits[i].score, hits[i - 1].score);
      EXPECT_LE(hits[i].matched_topics.size(), 3u);
      const auto& docs = corpus().documents;
      const auto it = std::find_if(docs.begin(), docs.end(),
                                   [&](const Document& d) { return d.id == hits[i].doc_id; });
      ASSERT_NE(it, docs.end());
      if (fixture_->sample.labels[std::size_t(it - docs.begin())] == k) ++on_topic;
    }
    EXPECT_GE(on_topic, 8u) << "planted topic " << k;
  }
}

TEST_F(Trained, ExactProfileRanksFirst) {
  const auto& p = index_->profiles()[11];
  const auto hits = rank_profiles(*index_, {p.level1_dist, p.level2_dist}, 3);
  ASSERT_FALSE(hits.empty());
  EXPECT_EQ(hits[0].doc_id, p.doc_id);
  EXPECT_NEAR(hits[0].score, 1.0, 1e-12);
}

TEST(RankProfiles, MatchingBeforeOrthogonalAndTiesById) {
  const SearchIndex idx({{"b", "s", {1, 0}, {1, 0}, "b"},
                         {"a", "s", {0, 1}, {0, 1}, "a"},
                         {"c", "s", {1, 0}, {1, 0}, "c"}},
                        7);
  const auto hits = rank_profiles(idx, {{1, 0}, {1, 0}}, 10);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].doc_id, "b");
  EXPECT_EQ(hits[1].doc_id, "c");
  EXPECT_EQ(hits[2].doc_id, "a");
  EXPECT_NEAR(hits[2].score, 0.0, 1e-12);
  EXPECT_EQ(rank_profiles(idx, {{1, 0}, {1, 0}}, 1).size(), 1u);
}

TEST(Hellinger, Bounds) {
  const std::vector<double> p{0.5, 0.5}, q{1.0, 0.0}, r{0.0, 1.0};
  EXPECT_NEAR(hellinger(p, p), 0.0, 1e-15);
  EXPECT_NEAR(hellinger(q, r), 1.0, 1e-15);
  // sqrt(1 - sqrt(0.5)).
  EXPECT_NEAR(hellinger(p, q), std::sqrt(1.0 - std::sqrt(0.5)), 1e-15);
}

// Every indexed document must appear exactly once across the subtopic
// listings reachable from the map.
void expect_total(const HierarchicalModel& model, const SearchIndex& index, const MapNode& root,
                  const MapOptions& options) {
  const auto layout = layout_map(model, index, options.edge_tau);
  std::map<std::string, int> seen;
  for (const auto& topic : root.children) {
    EXPECT_EQ(topic.kind, MapNodeKind::kTopic);
    for (const auto& sub : topic.children) {
      EXPECT_EQ(sub.kind, MapNodeKind::kSubtopic);
      EXPECT_GT(sub.weight, 0.0);
      std::size_t t = 0, a = 0;
      ASSERT_EQ(std::sscanf(sub.id.c_str(), "subtopic:%zu:%zu", &t, &a), 2) << sub.id;
      const auto docs = subtopic_documents(index, layout, t, a);
      for (const auto* p : docs) ++seen[p->doc_id];
      const std::size_t shown = std::min(docs.size(), options.docs_per_cell);
      const bool has_more = docs.size() > options.docs_per_cell;
      ASSERT_EQ(sub.children.size(), shown + (has_more ? 1 : 0));
      for (std::size_t i = 0; i < shown; ++i) {
        EXPECT_EQ(sub.children[i].kind, MapNodeKind::kDocument);
        EXPECT_EQ(sub.children[i].id, "doc:" + docs[i]->doc_id);
      }
      if (has_more) {
        EXPECT_EQ(sub.children.back().kind, MapNodeKind::kMore);
        EXPECT_TRUE(sub.children.back().children.empty());
      }
    }
  }
  EXPECT_EQ(seen.size(), index.size());
  for (const auto& [id, n] : seen) EXPECT_EQ(n, 1) << id;
}

TEST_F(Trained, MapShapeAndTotality) {
  const auto root = build_map(*model_, *index_);
  EXPECT_EQ(root.kind, MapNodeKind::kRoot);
  EXPECT_EQ(root.children.size(), 4u);
  double weight = 0.0;
  for (const auto& topic : root.children) {
    EXPECT_GT(topic.weight, 0.0);
    weight += topic.weight;
    EXPECT_EQ(std::count(topic.label.begin(), topic.label.end(), ','), 2);
  }
  EXPECT_LE(weight, 1.0 + 1e-9);
  expect_total(*model_, *index_, root, {});
}

TEST_F(Trained, EdgeTauAboveOneFallsBackToArgmaxParent) {
  const MapOptions options{1.1, 10};
  const auto root = build_map(*model_, *index_, options);
  const auto layout = layout_map(*model_, *index_, 1.1);
  for (const auto a : model_->level2.subject_topics()) {
    ASSERT_EQ(layout.parents_of[a].size(), 1u);
    Eigen::Index best = 0;
    model_->psi.row(Eigen::Index(a)).head(4).maxCoeff(&best);
    EXPECT_EQ(layout.parents_of[a][0], std::size_t(best));
  }
  expect_total(*model_, *index_, root, options);
}

TEST_F(Trained, TotalityAcrossThresholdsAndCellSizes) {
  for (const double tau : {0.0, 0.05, 0.3, 0.9}) {
    for (const std::size_t cell : {1u, 3u, 50u}) {
      const MapOptions options{tau, cell};
      expect_total(*model_, *index_, build_map(*model_, *index_, options), options);
    }
  }
}

TEST_F(Trained, SmallCellHasNoMoreNode) {
  // Keep three profiles only: every subtopic then lists at most three.
  const std::vector<DocumentProfile> three(index_->profiles().begin(),
                                           index_->profiles().begin() + 3);
  const SearchIndex small(three, index_->model_hash());
  const auto root = build_map(*model_, small, {0.05, 10});
  std::size_t documents = 0;
  for (const auto& topic : root.children) {
    for (const auto& sub : topic.children) {
      for (const auto& leaf : sub.children) {
        EXPECT_NE(leaf.kind, MapNodeKind::kMore);
        ++documents;
      }
    }
  }
  EXPECT_EQ(documents, 3u);
}

TEST(Map, DefaultConfigHasTwentyTopics) {
  const auto fx = flat_fixture(5, 20, 20, 120, 3);
  auto cfg = HierarchyConfig{};
  cfg.schedule.max_passes = 2;
  const auto model = train_hierarchy(fx.sample.corpus, cfg);
  const auto root = build_map(model, build_index(model, fx.sample.corpus));
  EXPECT_EQ(root.children.size(), 20u);
  EXPECT_EQ(root.children[0].id, "topic:0");
}

TEST(Map, NodeKindNames) {
  EXPECT_EQ(map_node_kind_name(MapNodeKind::kTopic), "topic");
  EXPECT_EQ(map_node_kind_name(MapNodeKind::kSubtopic), "subtopic");
  EXPECT_EQ(map_node_kind_name(MapNodeKind::kDocument), "document");
  EXPECT_EQ(map_node_kind_name(MapNodeKind::kMore), "more");
  EXPECT_EQ(subtopic_node_id(2, 5), "subtopic:2:5");
}

}  // namespace
}  // namespace topicmap

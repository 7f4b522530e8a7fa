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

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "support/synthetic.hpp"
#include "topicmap/error.hpp"

namespace topicmap {
namespace {

using Words = std::vector<std::string>;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected topicmap::Error";
  return ErrorCode::kIo;
}

EmbeddingTable parse_table(const std::string& text) {
  std::istringstream in(text);
  return load_embeddings(in);
}

// Single-topic subject level whose top words are `words` in order.
TopicModelLevel level_with(const Words& vocab, const std::vector<double>& column) {
  TopicModelLevel m;
  m.vocabulary = Vocabulary(vocab);
  m.phi = Eigen::Map<const Eigen::VectorXd>(column.data(), Eigen::Index(column.size()));
  m.roles = {TopicRole::kSubject};
  m.n_t = Eigen::VectorXd::Ones(1);
  return m;
}

TEST(LoadEmbeddings, ValidTable) {
  const auto t = parse_table("2 3\ncat 1 0 0\ndog 0 1 0\n");
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(t.size(), 2u);
  ASSERT_NE(t.find("dog"), nullptr);
  EXPECT_EQ(*t.find("dog"), (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(t.find("emu"), nullptr);
}

TEST(LoadEmbeddings, ShortLine) {
  EXPECT_EQ(code_of([] { parse_table("2 3\ncat 1 0\ndog 0 1 0\n"); }),
            ErrorCode::kDimensionMismatch);
}

TEST(LoadEmbeddings, DuplicateLastWins) {
  const auto t = parse_table("2 2\ncat 1 0\ncat 0 1\n");
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.duplicates(), 1u);
  EXPECT_EQ(*t.find("cat"), (std::vector<double>{0, 1}));
}

TEST(LoadEmbeddings, MalformedLines) {
  EXPECT_EQ(code_of([] { parse_table("2 x\n"); }), ErrorCode::kMalformedEmbeddingLine);
  EXPECT_EQ(code_of([] { parse_table("1 2\ncat 1 zz\n"); }), ErrorCode::kMalformedEmbeddingLine);
}

TEST(Cosine, Basics) {
  const std::vector<double> a{1, 0}, b{0, 2}, c{3, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, c), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, b), 0.0);
}

TEST(Coherence, IdenticalAndOrthogonal) {
  EmbeddingTable t(2);
  t.insert("a", {1, 0});
  t.insert("b", {1, 0});
  t.insert("c", {0, 1});
  EXPECT_NEAR(topic_coherence(Words{"a", "b"}, t), 100.0, 1e-12);
  EXPECT_NEAR(topic_coherence(Words{"a", "c"}, t), 0.0, 1e-12);
}

// Unit vectors with the given Gram matrix via its Cholesky factor.
EmbeddingTable table_from_gram(const Words& names, const Eigen::MatrixXd& gram) {
  const Eigen::MatrixXd l = gram.llt().matrixL();
  EmbeddingTable t(static_cast<std::size_t>(gram.rows()));
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    std::vector<double> v(l.cols());
    for (Eigen::Index j = 0; j < l.cols(); ++j) v[j] = l(i, j);
    t.insert(names[i], v);
  }
  return t;
}

TEST(Coherence, ThreeWordMean) {
  Eigen::Matrix3d g;
  g << 1, 0.5, 0.2, 0.5, 1, 0.8, 0.2, 0.8, 1;
  const auto t = table_from_gram({"x", "y", "z"}, g);
  EXPECT_NEAR(topic_coherence(Words{"x", "y", "z"}, t), 50.0, 1e-9);
}

TEST(Coherence, MissingWordsAreSkippedAndCounted) {
  EmbeddingTable t(2);
  t.insert("a", {1, 0});
  t.insert("b", {1, 0});
  t.insert("zero", {0, 0});
  std::size_t missing = 0;
  EXPECT_NEAR(topic_coherence(Words{"a", "nope", "b", "zero"}, t, &missing), 100.0, 1e-12);
  EXPECT_EQ(missing, 2u);
  EXPECT_EQ(code_of([&] { topic_coherence(Words{"a", "nope"}, t); }),
            ErrorCode::kTooFewEmbeddedWords);
}

TEST(Coherence, BoundsAndPermutationInvariance) {
  std::mt19937_64 rng(8);
  EmbeddingTable t(5);
  Words names;
  for (int i = 0; i < 12; ++i) {
    names.push_back("w" + std::to_string(i));
    t.insert(names.back(), testing::random_unit(5, rng));
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(names.begin(), names.end(), rng);
    const Words words(names.begin(), names.begin() + 6);
    const double c = topic_coherence(words, t);
    EXPECT_GE(c, -100.0);
    EXPECT_LE(c, 100.0);
    Words reversed(words.rbegin(), words.rend());
    EXPECT_NEAR(topic_coherence(reversed, t), c, 1e-9);
  }
}

TEST(LevelQuality, MeanOverSubjectTopics) {
  EmbeddingTable t(2);
  t.insert("a", {1, 0});
  t.insert("b", {1, 0});
  t.insert("c", {1, 0});
  t.insert("d", {0, 1});
  TopicModelLevel m;
  m.vocabulary = Vocabulary({"a", "b", "c", "d"});
  m.phi.resize(4, 3);
  // Topic 0: a, b (100). Topic 1: c, d (0). Topic 2 is background.
  m.phi << 0.5, 0, 0.25, 0.5, 0, 0.25, 0, 0.5, 0.25, 0, 0.5, 0.25;
  m.roles = {TopicRole::kSubject, TopicRole::kSubject, TopicRole::kBackground};
  const auto q = level_quality(m, t, 2);
  EXPECT_NEAR(q.value, 50.0, 1e-9);
  EXPECT_EQ(q.scored_topics, 2u);
  EXPECT_EQ(q.failed_topics, 0u);
}

TEST(LevelQuality, SingleTopicEqualsItsCoherence) {
  Eigen::Matrix3d g;
  g << 1, 0.5, 0.2, 0.5, 1, 0.8, 0.2, 0.8, 1;
  const auto t = table_from_gram({"x", "y", "z"}, g);
  const auto m = level_with({"x", "y", "z"}, {0.5, 0.3, 0.2});
  EXPECT_NEAR(level_quality(m, t, 3).value, 50.0, 1e-9);
}

TEST(LevelQuality, FailingTopicsAreCounted) {
  EmbeddingTable t(2);
  t.insert("a", {1, 0});
  t.insert("b", {1, 0});
  TopicModelLevel m;
  m.vocabulary = Vocabulary({"a", "b", "c", "d"});
  m.phi.resize(4, 2);
  m.phi << 0.5, 0, 0.5, 0, 0, 0.5, 0, 0.5;
  m.roles = {TopicRole::kSubject, TopicRole::kSubject};
  const auto q = level_quality(m, t, 2);
  EXPECT_EQ(q.scored_topics, 1u);
  EXPECT_EQ(q.failed_topics, 1u);
  EXPECT_NEAR(q.value, 100.0, 1e-9);
}

TEST(EdgeRelevance, CrossPairMean) {
  const double a = std::sqrt(1 - 0.1 * 0.1 - 0.3 * 0.3);
  const double b = std::sqrt(1 - 0.5 * 0.5 - 0.7 * 0.7);
  EmbeddingTable t(3);
  t.insert("c1", {1, 0, 0});
  t.insert("c2", {0, 1, 0});
  t.insert("p1", {0.1, 0.3, a});
  t.insert("p2", {0.5, 0.7, b});
  const Words vocab{"p1", "p2", "c1", "c2"};
  const auto l1 = level_with(vocab, {0.5, 0.5, 0, 0});
  const auto l2 = level_with(vocab, {0, 0, 0.5, 0.5});
  const auto j = edge_relevance({0, 0, 0.7}, l1, l2, t, 2);
  EXPECT_NEAR(j.similarity, 0.4, 1e-12);
  EXPECT_EQ(j.edge, (Edge{0, 0, 0.7}));
}

TEST(EdgeRelevance, IdenticalAndOrthogonal) {
  EmbeddingTable t(2);
  t.insert("p", {1, 0});
  t.insert("c", {2, 0});
  t.insert("o", {0, 1});
  const Words vocab{"p", "c", "o"};
  const auto parent = level_with(vocab, {1, 0, 0});
  EXPECT_NEAR(edge_relevance({0, 0, 1}, parent, level_with(vocab, {0, 1, 0}), t, 1).similarity,
              1.0, 1e-12);
  EXPECT_NEAR(edge_relevance({0, 0, 1}, parent, level_with(vocab, {0, 0, 1}), t, 1).similarity,
              0.0, 1e-12);
  EmbeddingTable empty(2);
  EXPECT_EQ(code_of([&] { edge_relevance({0, 0, 1}, parent, parent, empty, 1); }),
            ErrorCode::kTooFewEmbeddedWords);
}

std::vector<EdgeJudgment> judged(const std::vector<double>& sims) {
  std::vector<EdgeJudgment> out;
  for (std::size_t i = 0; i < sims.size(); ++i) out.push_back({{0, i, 0.0}, sims[i], false});
  return out;
}

std::vector<bool> relevant(const std::vector<EdgeJudgment>& js) {
  std::vector<bool> out;
  for (const auto& j : js) out.push_back(j.relevant);
  return out;
}

TEST(Binarize, NearestRankExample) {
  EXPECT_EQ(relevant(binarize_judgments(judged({0.1, 0.2, 0.3, 0.4}), 75)),
            (std::vector<bool>{false, false, false, true}));
}

TEST(Binarize, EqualSimilaritiesAreAllRelevant) {
  EXPECT_EQ(relevant(binarize_judgments(judged({0.3, 0.3, 0.3}), 75)),
            (std::vector<bool>{true, true, true}));
}

TEST(Binarize, PercentileZeroAndOrderPreserved) {
  EXPECT_EQ(relevant(binarize_judgments(judged({0.4, -0.2, 0.1}), 0)),
            (std::vector<bool>{true, true, true}));
  EXPECT_EQ(relevant(binarize_judgments(judged({0.4, 0.1, 0.3, 0.2}), 75)),
            (std::vector<bool>{true, false, false, false}));
}

TEST(AveragePrecision, Examples) {
  const bool r1[] = {true, false, true};
  EXPECT_NEAR(average_precision_at_k(r1, 3), 100.0 * (1.0 + 2.0 / 3.0) / 2.0, 1e-9);
  const bool all[] = {true, true, true, true};
  for (std::size_t k = 1; k <= 6; ++k) EXPECT_NEAR(average_precision_at_k(all, k), 100.0, 1e-12);
  const bool none[] = {false, false};
  EXPECT_EQ(average_precision_at_k(none, 2), 0.0);
}

TEST(AveragePrecision, NormalisedByMinOfKAndRelevant) {
  // R = 2 but only the first item fits in k = 1.
  const bool r[] = {true, false, true};
  EXPECT_NEAR(average_precision_at_k(r, 1), 100.0, 1e-12);
  // Relevant items beyond k still count in R when R > k.
  const bool late[] = {false, true, true, true};
  EXPECT_NEAR(average_precision_at_k(late, 2), 100.0 * (1.0 / 2.0) / 2.0, 1e-12);
}

TEST(AveragePrecision, AllRelevantPrefixGivesFullScore) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + trial % 10;
    std::array<bool, 32> list{};
    const std::size_t n = k + trial % 7;
    for (std::size_t i = 0; i < n; ++i) list[i] = i < k || coin(rng);
    EXPECT_NEAR(average_precision_at_k({list.data(), n}, k), 100.0, 1e-12);
  }
}

class SmallAblation : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    testing::AblationSpec spec;
    spec.initial_docs = 80;
    spec.added_docs = 80;
    spec.noise_words = 100;
    fixture_ = new testing::AblationFixture(testing::ablation_fixture(spec, 4));
    config_ = testing::small_config(5, 10, 5);
    initial_ = new HierarchicalModel(train_hierarchy(fixture_->initial.corpus, config_));
  }
  static void TearDownTestSuite() {
    delete fixture_;
    delete initial_;
  }

  static AblationReport run(const std::vector<Strategy>& strategies, const EmbeddingTable& t) {
    AblationOptions options;
    options.k_list = {5, 20};
    options.parallel = false;
    return ablation_report(*initial_, fixture_->initial.corpus, fixture_->added.corpus, strategies,
                           t, config_, options);
  }

  static testing::AblationFixture* fixture_;
  static HierarchyConfig config_;
  static HierarchicalModel* initial_;
};
testing::AblationFixture* SmallAblation::fixture_ = nullptr;
HierarchyConfig SmallAblation::config_;
HierarchicalModel* SmallAblation::initial_ = nullptr;

TEST_F(SmallAblation, SingleStrategyRowIsFinite) {
  const auto report = run({parse_strategy("D-I-")}, fixture_->embeddings);
  ASSERT_EQ(report.rows.size(), 1u);
  const auto& row = report.rows[0];
  EXPECT_FALSE(row.failed) << row.error;
  EXPECT_EQ(row.label, "No init, no fixed vocab (Baseline)");
  EXPECT_TRUE(std::isfinite(row.level1_quality));
  EXPECT_TRUE(std::isfinite(row.level2_quality));
  ASSERT_EQ(row.ap.size(), 2u);
  for (const auto& [k, ap] : row.ap) {
    EXPECT_TRUE(std::isfinite(ap));
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, 100.0);
  }
  EXPECT_EQ(row.edge_curve.size(), 101u);
  EXPECT_EQ(row.judged_edges + row.unjudged_edges, 50u);
  EXPECT_EQ(report.to_json()["rows"].size(), 1u);
  EXPECT_NE(report.to_text().find("Baseline"), std::string::npos);
}

TEST_F(SmallAblation, RowLabelsFollowTableOrder) {
  const auto report = run(all_strategies(), fixture_->embeddings);
  const Words expected{"No init, no fixed vocab (Baseline)",
                       "No init, fixed vocab",
                       "Init, no fixed vocab",
                       "Iterative init, no fixed vocab",
                       "Iterative init, fixed vocab",
                       "Init, fixed vocab (Proposed)"};
  ASSERT_EQ(report.rows.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(report.rows[i].label, expected[i]);
    EXPECT_FALSE(report.rows[i].failed) << report.rows[i].error;
  }
}

TEST_F(SmallAblation, ScaleInvariance) {
  EmbeddingTable scaled(fixture_->embeddings.dim());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> factor(0.1, 10.0);
  // Every vector gets its own positive factor; the token list comes from the
  // two corpora since the table is not iterable.
  for (const auto* c : {&fixture_->initial.corpus, &fixture_->added.corpus}) {
    for (const auto& token : c->vocabulary.entries()) {
      const auto* v = fixture_->embeddings.find(token);
      if (!v || scaled.find(token)) continue;
      auto copy = *v;
      const double f = factor(rng);
      for (auto& x : copy) x *= f;
      scaled.insert(token, copy);
    }
  }
  const std::vector<Strategy> s{parse_strategy("D+I+")};
  const auto a = run(s, fixture_->embeddings).rows.at(0);
  const auto b = run(s, scaled).rows.at(0);
  EXPECT_NEAR(a.level1_quality, b.level1_quality, 1e-9);
  EXPECT_NEAR(a.level2_quality, b.level2_quality, 1e-9);
  for (std::size_t i = 0; i < a.ap.size(); ++i) EXPECT_NEAR(a.ap[i].second, b.ap[i].second, 1e-9);
}

}  // namespace
}  // namespace topicmap

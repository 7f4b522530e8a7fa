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

#include "topicmap/artm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support/synthetic.hpp"
#include "topicmap/error.hpp"

namespace topicmap {
namespace {

using testing::flat_fixture;
using testing::greedy_align;
using testing::top_overlap;

// Hand-built model with uniform theta over `n_docs` documents.
TopicModelLevel make_model(const std::vector<std::string>& words, Eigen::MatrixXd phi,
                           std::vector<TopicRole> roles, std::size_t n_docs) {
  TopicModelLevel m;
  m.vocabulary = Vocabulary(words);
  m.phi = std::move(phi);
  m.roles = std::move(roles);
  const auto t = static_cast<Eigen::Index>(m.roles.size());
  m.theta = Eigen::MatrixXd::Constant(t, static_cast<Eigen::Index>(n_docs), 1.0 / double(t));
  m.n_t = Eigen::VectorXd::Zero(t);
  for (std::size_t d = 0; d < n_docs; ++d) m.doc_ids.push_back("d" + std::to_string(d));
  return m;
}

SufficientStats stats_of(Eigen::MatrixXd n_wt, Eigen::Index n_docs) {
  SufficientStats s;
  s.n_td = Eigen::MatrixXd::Ones(n_wt.cols(), n_docs);
  s.n_wt = std::move(n_wt);
  return s;
}

TEST(InitModel, WarmStartIdentity) {
  const auto vocab = Vocabulary({"a", "b", "c"});
  const auto src = init_model(vocab, {2, 1, 5}, RandomInit{5});
  const auto warm = init_model(vocab, {2, 1, 5}, WarmStart{&src});
  EXPECT_LE((warm.phi - src.phi).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(warm.roles, src.roles);
}

TEST(InitModel, WarmStartNewWordEpsilon) {
  Eigen::MatrixXd phi(2, 1);
  phi << 0.7, 0.3;
  const auto src = make_model({"a", "b"}, phi, {TopicRole::kSubject}, 1);
  const auto warm = init_model(Vocabulary({"a", "b", "c"}), {1, 0, 1}, WarmStart{&src});
  ASSERT_EQ(warm.phi.rows(), 3);
  // Hand-evaluated: (0.7, 0.3, 1e-6) / 1.000001.
  EXPECT_NEAR(warm.phi(0, 0), 0.7 / 1.000001, 1e-15);
  EXPECT_NEAR(warm.phi(1, 0), 0.3 / 1.000001, 1e-15);
  EXPECT_NEAR(warm.phi(2, 0), 1e-6 / 1.000001, 1e-18);
}

TEST(InitModel, WarmStartRequiresPrefix) {
  const auto src = init_model(Vocabulary({"a", "b"}), {1, 0, 1}, RandomInit{1});
  try {
    init_model(Vocabulary({"b", "a", "c"}), {1, 0, 1}, WarmStart{&src});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVocabularyMismatch);
  }
}

TEST(InitModel, RandomIsDeterministic) {
  const auto vocab = Vocabulary({"a", "b", "c", "d"});
  const auto a = init_model(vocab, {3, 1, 1}, RandomInit{1});
  const auto b = init_model(vocab, {3, 1, 1}, RandomInit{1});
  const auto c = init_model(vocab, {3, 1, 1}, RandomInit{2});
  EXPECT_EQ(a.phi, b.phi);
  EXPECT_NE(a.phi, c.phi);
}

TEST(InitModel, LastTopicsAreBackground) {
  const auto m = init_model(Vocabulary({"a", "b"}), {3, 2, 1}, RandomInit{1});
  EXPECT_EQ(m.roles, (std::vector<TopicRole>{TopicRole::kSubject, TopicRole::kSubject,
                                             TopicRole::kSubject, TopicRole::kBackground,
                                             TopicRole::kBackground}));
  EXPECT_EQ(m.subject_topics(), (std::vector<std::size_t>{0, 1, 2}));
  for (Eigen::Index t = 0; t < m.phi.cols(); ++t) {
    EXPECT_NEAR(m.phi.col(t).sum(), 1.0, 1e-12);
    EXPECT_GT(m.phi.col(t).minCoeff(), 0.0);
  }
}

TEST(EStep, SymmetricPosterior) {
  Eigen::MatrixXd phi(2, 2);
  phi << 0.5, 0.5, 0.5, 0.5;
  const auto m = make_model({"w", "v"}, phi, {TopicRole::kSubject, TopicRole::kSubject}, 1);
  const std::vector<Document> docs{{"d0", "s", {{0, 1.0}}}};
  const auto s = e_step(m, docs);
  EXPECT_NEAR(s.n_wt(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(s.n_wt(0, 1), 0.5, 1e-15);
}

TEST(EStep, BayesPosterior) {
  Eigen::MatrixXd phi(2, 2);
  phi << 0.9, 0.1, 0.1, 0.9;
  const auto m = make_model({"w", "v"}, phi, {TopicRole::kSubject, TopicRole::kSubject}, 1);
  const std::vector<Document> docs{{"d0", "s", {{0, 1.0}}}};
  const auto s = e_step(m, docs);
  EXPECT_NEAR(s.n_wt(0, 0), 0.9, 1e-15);
  EXPECT_NEAR(s.n_wt(0, 1), 0.1, 1e-15);
  EXPECT_NEAR(s.n_td(0, 0), 0.9, 1e-15);
  // ln p(w|d) = ln(0.5 * 0.9 + 0.5 * 0.1).
  EXPECT_NEAR(s.log_likelihood, std::log(0.5), 1e-12);
}

TEST(EStep, SingleTopicCountsAreRaw) {
  Eigen::MatrixXd phi(3, 1);
  phi << 0.2, 0.3, 0.5;
  const auto m = make_model({"a", "b", "c"}, phi, {TopicRole::kSubject}, 2);
  const std::vector<Document> docs{{"d0", "s", {{0, 2.0}, {2, 1.0}}},
                                   {"d1", "s", {{1, 4.0}, {2, 3.0}}}};
  const auto s = e_step(m, docs);
  EXPECT_NEAR(s.n_wt(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(s.n_wt(1, 0), 4.0, 1e-12);
  EXPECT_NEAR(s.n_wt(2, 0), 4.0, 1e-12);
  EXPECT_NEAR(s.processed_tokens, 10.0, 1e-12);
}

TEST(EStep, ZeroDenominator) {
  Eigen::MatrixXd phi(2, 1);
  phi << 1.0, 0.0;
  const auto m = make_model({"a", "b"}, phi, {TopicRole::kSubject}, 1);
  const std::vector<Document> docs{{"d0", "s", {{0, 1.0}, {1, 1.0}}}};
  try {
    e_step(m, docs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroDenominator);
  }
}

TEST(EStep, ConservationAndMergeability) {
  const auto fx = flat_fixture(4, 20, 10, 60, 3);
  const auto& docs = fx.sample.corpus.documents;
  auto m = init_model(fx.sample.corpus.vocabulary, {4, 1, 3}, RandomInit{3});
  m = fit(m, docs, {2, 0.0}, RegularizerConfig::none()).model;
  const auto whole = e_step(m, docs);
  double tokens = 0.0;
  for (const auto& d : docs) tokens += d.length();
  EXPECT_NEAR(whole.n_wt.sum(), tokens, 1e-6 * tokens);

  std::vector<std::size_t> even, odd;
  for (std::size_t i = 0; i < docs.size(); ++i) (i % 2 ? odd : even).push_back(i);
  auto merged = e_step(m, docs, even);
  merged += e_step(m, docs, odd);
  EXPECT_LE((merged.n_wt - whole.n_wt).cwiseAbs().maxCoeff(), 1e-9 * whole.n_wt.maxCoeff());
  EXPECT_LE((merged.n_td - whole.n_td).cwiseAbs().maxCoeff(), 1e-9 * whole.n_td.maxCoeff());
}

TEST(MStep, PlsaReduction) {
  Eigen::MatrixXd n(3, 2);
  n << 1, 4, 2, 0, 3, 4;
  const auto m = make_model({"a", "b", "c"}, Eigen::MatrixXd::Constant(3, 2, 1.0 / 3),
                            {TopicRole::kSubject, TopicRole::kBackground}, 1);
  const auto next = m_step(m, stats_of(n, 1), RegularizerConfig::none());
  for (Eigen::Index t = 0; t < 2; ++t) {
    for (Eigen::Index w = 0; w < 3; ++w) EXPECT_DOUBLE_EQ(next.phi(w, t), n(w, t) / n.col(t).sum());
  }
  EXPECT_DOUBLE_EQ(next.n_t[0], 6.0);
  EXPECT_DOUBLE_EQ(next.n_t[1], 8.0);
}

TEST(MStep, BackgroundSmoothing) {
  Eigen::MatrixXd n(2, 1);
  n << 1, 3;
  const auto m = make_model({"a", "b"}, Eigen::MatrixXd::Constant(2, 1, 0.5),
                            {TopicRole::kBackground}, 1);
  auto reg = RegularizerConfig::none();
  reg.smooth_beta = 1.0;
  const auto next = m_step(m, stats_of(n, 1), reg);
  EXPECT_NEAR(next.phi(0, 0), 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(next.phi(1, 0), 4.0 / 6.0, 1e-15);
}

TEST(MStep, TruncatedColumnIsRepairedUniform) {
  Eigen::MatrixXd n(4, 2);
  n << 0, 5, 0, 5, 0, 5, 0, 5;
  const auto m = make_model({"a", "b", "c", "d"}, Eigen::MatrixXd::Constant(4, 2, 0.25),
                            {TopicRole::kSubject, TopicRole::kSubject}, 1);
  auto reg = RegularizerConfig::none();
  reg.sparse_beta = 0.5;
  MStepReport report;
  const auto next = m_step(m, stats_of(n, 1), reg, &report);
  EXPECT_EQ(report.phi_repairs, 1u);
  for (Eigen::Index w = 0; w < 4; ++w) EXPECT_DOUBLE_EQ(next.phi(w, 0), 0.25);
}

TEST(MStep, SparsingTruncatesSmallCounts) {
  Eigen::MatrixXd n(3, 1);
  n << 0.02, 1.0, 3.0;
  const auto m = make_model({"a", "b", "c"}, Eigen::MatrixXd::Constant(3, 1, 1.0 / 3),
                            {TopicRole::kSubject}, 1);
  auto reg = RegularizerConfig::none();
  reg.sparse_beta = 0.05;
  const auto next = m_step(m, stats_of(n, 1), reg);
  EXPECT_EQ(next.phi(0, 0), 0.0);
  EXPECT_NEAR(next.phi(1, 0), 0.95 / 3.9, 1e-15);
}

TEST(MStep, DecorrelationPenalisesSharedWords) {
  // Both subject topics put mass on word 0; decorrelation lowers it.
  Eigen::MatrixXd phi(2, 2);
  phi << 0.8, 0.6, 0.2, 0.4;
  Eigen::MatrixXd n(2, 2);
  n << 10, 10, 10, 10;
  const auto m = make_model({"a", "b"}, phi, {TopicRole::kSubject, TopicRole::kSubject}, 1);
  auto reg = RegularizerConfig::none();
  reg.decorr_gamma = 10.0;
  const auto next = m_step(m, stats_of(n, 1), reg);
  // Column 0: r = -10 * (0.8 * 0.6, 0.2 * 0.4) = (-4.8, -0.8).
  EXPECT_NEAR(next.phi(0, 0), 5.2 / (5.2 + 9.2), 1e-12);
}

TEST(MStep, ThetaSmoothingOnlyOnBackground) {
  const auto m = make_model({"a"}, Eigen::MatrixXd::Ones(1, 2),
                            {TopicRole::kSubject, TopicRole::kBackground}, 1);
  auto s = stats_of(Eigen::MatrixXd::Ones(1, 2), 1);
  s.n_td << 3.0, 1.0;
  auto reg = RegularizerConfig::none();
  reg.smooth_alpha = 2.0;
  const auto next = m_step(m, s, reg);
  EXPECT_NEAR(next.theta(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(next.theta(1, 0), 0.5, 1e-15);
}

TEST(MStep, StochasticityProperty) {
  const auto fx = flat_fixture(5, 20, 20, 80, 9);
  const auto& docs = fx.sample.corpus.documents;
  auto m = init_model(fx.sample.corpus.vocabulary, {5, 1, 9}, RandomInit{9});
  m.theta = Eigen::MatrixXd::Constant(6, static_cast<Eigen::Index>(docs.size()), 1.0 / 6);
  for (const auto& d : docs) m.doc_ids.push_back(d.id);
  for (int pass = 0; pass < 5; ++pass) {
    m = m_step(m, e_step(m, docs), RegularizerConfig{});
    EXPECT_NO_THROW(m.validate(1e-6));
    EXPECT_GE(m.phi.minCoeff(), 0.0);
    EXPECT_GE(m.theta.minCoeff(), 0.0);
  }
}

TEST(Fit, ZeroRegularizerTraceIsMonotone) {
  const auto fx = flat_fixture(5, 20, 20, 100, 4);
  const auto m = init_model(fx.sample.corpus.vocabulary, {5, 1, 4}, RandomInit{4});
  const auto r = fit(m, fx.sample.corpus.documents, {25, 0.0}, RegularizerConfig::none());
  ASSERT_EQ(r.perplexity_trace.size(), 25u);
  for (std::size_t i = 1; i < r.perplexity_trace.size(); ++i) {
    EXPECT_LE(r.perplexity_trace[i], r.perplexity_trace[i - 1] * (1 + 1e-8));
  }
}

TEST(Fit, SinglePassGivesOneEntry) {
  const auto fx = flat_fixture(2, 10, 5, 20, 4);
  const auto m = init_model(fx.sample.corpus.vocabulary, {2, 1, 4}, RandomInit{4});
  EXPECT_EQ(fit(m, fx.sample.corpus.documents, {1, 1e-3}, {}).perplexity_trace.size(), 1u);
}

TEST(Fit, StopsOnRelativeTolerance) {
  const auto fx = flat_fixture(2, 10, 5, 40, 4);
  const auto m = init_model(fx.sample.corpus.vocabulary, {2, 1, 4}, RandomInit{4});
  const auto r = fit(m, fx.sample.corpus.documents, {500, 1e-2}, {});
  EXPECT_LT(r.perplexity_trace.size(), 500u);
  const auto n = r.perplexity_trace.size();
  ASSERT_GE(n, 2u);
  EXPECT_LT(std::abs(r.perplexity_trace[n - 1] - r.perplexity_trace[n - 2]) /
                r.perplexity_trace[n - 1],
            1e-2);
}

TEST(Fit, DeterministicAcrossRuns) {
  const auto fx = flat_fixture(3, 15, 10, 60, 8);
  const auto m = init_model(fx.sample.corpus.vocabulary, {3, 1, 8}, RandomInit{8});
  const auto a = fit(m, fx.sample.corpus.documents, {10, 0.0}, {});
  const auto b = fit(m, fx.sample.corpus.documents, {10, 0.0}, {});
  EXPECT_EQ(a.model.phi, b.model.phi);
  EXPECT_EQ(a.model.theta, b.model.theta);
  EXPECT_EQ(a.perplexity_trace, b.perplexity_trace);
}

TEST(Fit, RecoversTwoPlantedTopics) {
  const auto fx = flat_fixture(2, 20, 10, 200, 21);
  const auto m = init_model(fx.sample.corpus.vocabulary, {2, 1, 21}, RandomInit{21});
  const auto r = fit(m, fx.sample.corpus.documents, {60, 1e-5}, {});
  const auto align = greedy_align(r.model, fx.topics);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_GE(top_overlap(r.model, align[k], fx.topics[k], 5), 0.8);
  }
}

TEST(Perplexity, UniformModelEqualsVocabularySize) {
  const auto m = make_model({"a", "b", "c", "d"}, Eigen::MatrixXd::Constant(4, 2, 0.25),
                            {TopicRole::kSubject, TopicRole::kSubject}, 1);
  const std::vector<Document> docs{{"d0", "s", {{0, 3.0}, {2, 1.0}}}};
  EXPECT_NEAR(perplexity(m, docs), 4.0, 1e-12);
}

TEST(Perplexity, CertainModelIsOne) {
  Eigen::MatrixXd phi(2, 1);
  phi << 1.0, 0.0;
  const auto m = make_model({"a", "b"}, phi, {TopicRole::kSubject}, 1);
  const std::vector<Document> docs{{"d0", "s", {{0, 7.0}}}};
  EXPECT_NEAR(perplexity(m, docs), 1.0, 1e-12);
}

TEST(Perplexity, TwoWordExample) {
  Eigen::MatrixXd phi(2, 1);
  phi << 0.8, 0.2;
  const auto m = make_model({"a", "b"}, phi, {TopicRole::kSubject}, 1);
  const std::vector<Document> docs{{"d0", "s", {{0, 1.0}, {1, 1.0}}}};
  EXPECT_NEAR(perplexity(m, docs), 2.5, 1e-12);
}

TEST(Perplexity, ZeroProbabilityUsesFloor) {
  Eigen::MatrixXd phi(2, 1);
  phi << 1.0, 0.0;
  const auto m = make_model({"a", "b"}, phi, {TopicRole::kSubject}, 1);
  const std::vector<Document> docs{{"d0", "s", {{1, 1.0}}}};
  EXPECT_NEAR(perplexity(m, docs), 1e15, 1e3);
}

TEST(TopWords, OrderedByProbability) {
  Eigen::MatrixXd phi(3, 1);
  phi << 0.5, 0.3, 0.2;
  const auto m = make_model({"a", "b", "c"}, phi, {TopicRole::kSubject}, 1);
  const auto top = top_words(m, 0, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0], (std::pair<std::string, double>{"a", 0.5}));
  EXPECT_EQ(top[1], (std::pair<std::string, double>{"b", 0.3}));
}

TEST(TopWords, TiesByLowerIndex) {
  Eigen::MatrixXd phi(3, 1);
  phi << 0.2, 0.4, 0.4;
  const auto m = make_model({"a", "b", "c"}, phi, {TopicRole::kSubject}, 1);
  EXPECT_EQ(top_words(m, 0, 1).at(0).first, "b");
}

TEST(TopWords, ShortVocabularyAndDefaultK) {
  Eigen::MatrixXd phi(3, 1);
  phi << 0.2, 0.4, 0.4;
  const auto m = make_model({"a", "b", "c"}, phi, {TopicRole::kSubject}, 1);
  EXPECT_EQ(top_words(m, 0).size(), 3u);
  const auto fx = flat_fixture(1, 30, 5, 20, 2);
  const auto big = init_model(fx.sample.corpus.vocabulary, {1, 0, 2}, RandomInit{2});
  EXPECT_EQ(top_words(big, 0).size(), 10u);
}

}  // namespace
}  // namespace topicmap

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

// Flat additively-regularized topic model (PLSA + smoothing / sparsing /
// decorrelation) trained by EM.
//
// E-step:  p(t|d,w) = phi_wt theta_td / sum_s phi_ws theta_sd
//          n_wt += n_dw p(t|d,w),  n_td += n_dw p(t|d,w)
// M-step:  phi_wt   ~ max(n_wt + r_wt, 0)
//          theta_td ~ max(n_td + a_td, 0)
//   r_wt = +smooth_beta                                   background t
//   r_wt = -sparse_beta - gamma phi_wt sum_{s!=t} phi_ws   subject t (s subject)
//   a_td = +smooth_alpha for background t, 0 otherwise

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "topicmap/corpus.hpp"

namespace topicmap {

enum class TopicRole : std::uint8_t { kSubject = 0, kBackground = 1 };

struct TopicConfig {
  std::size_t n_subject = 20;
  std::size_t n_background = 1;
  std::uint64_t seed = 1;

  std::size_t total() const { return n_subject + n_background; }
  void validate() const;
  bool operator==(const TopicConfig&) const = default;
};

struct RegularizerConfig {
  double smooth_beta = 0.1;
  double smooth_alpha = 0.1;
  double sparse_beta = 0.05;
  // Unset means 0.05 * mean(n_t) / W, evaluated at every M-step.
  std::optional<double> decorr_gamma;

  static RegularizerConfig none() { return {0.0, 0.0, 0.0, 0.0}; }
  void validate() const;
  bool operator==(const RegularizerConfig&) const = default;
};

struct TopicModelLevel {
  Vocabulary vocabulary;
  Eigen::MatrixXd phi;    // W x T, columns are p(w|t)
  Eigen::MatrixXd theta;  // T x D, columns are p(t|d) of the training docs
  std::vector<TopicRole> roles;
  Eigen::VectorXd n_t;    // expected token mass per topic
  std::vector<std::string> doc_ids;  // one per theta column

  std::size_t num_words() const { return static_cast<std::size_t>(phi.rows()); }
  std::size_t num_topics() const { return roles.size(); }
  std::vector<std::size_t> subject_topics() const;
  std::size_t num_subject() const { return subject_topics().size(); }

  // Throws kInvalidArgument when shapes disagree or a column of phi/theta is
  // not a probability vector within `tol`.
  void validate(double tol = 1e-6) const;
};

inline constexpr double kNewWordEpsilon = 1e-6;

struct RandomInit {
  std::uint64_t seed = 1;
};

// Copies phi rows of `source` for shared tokens; new tokens get
// kNewWordEpsilon and each column is renormalized. The source vocabulary must
// be an index prefix of the target vocabulary.
struct WarmStart {
  const TopicModelLevel* source = nullptr;
};

using InitMode = std::variant<RandomInit, WarmStart>;

// Theta is left empty; fit() sizes it to the training documents.
TopicModelLevel init_model(const Vocabulary& vocabulary,
                           const TopicConfig& config, const InitMode& init);

struct SufficientStats {
  Eigen::MatrixXd n_wt;  // W x T
  Eigen::MatrixXd n_td;  // T x D, zero outside the processed batch
  double processed_tokens = 0.0;
  double skipped_tokens = 0.0;
  std::size_t skipped_events = 0;
  // sum n_dw ln p(w|d), skipped tokens contribute ln(kProbabilityFloor).
  double log_likelihood = 0.0;

  SufficientStats& operator+=(const SufficientStats& other);
};

inline constexpr double kProbabilityFloor = 1e-15;
// Fraction of token mass that may hit a zero denominator before the E-step
// gives up on the model.
inline constexpr double kMaxSkippedFraction = 0.01;

// E-step over docs[i] for i in `batch`; theta column i belongs to docs[i].
// Throws kZeroDenominator when more than 1% of the batch mass is skipped.
SufficientStats e_step(const TopicModelLevel& model,
                       std::span<const Document> docs,
                       std::span<const std::size_t> batch);

// E-step over every document, run as fixed-size batches on a thread pool.
// The partition does not depend on the thread count.
SufficientStats e_step(const TopicModelLevel& model,
                       std::span<const Document> docs);

struct MStepReport {
  std::size_t phi_repairs = 0;
  std::size_t theta_repairs = 0;
};

TopicModelLevel m_step(const TopicModelLevel& model,
                       const SufficientStats& stats,
                       const RegularizerConfig& reg,
                       MStepReport* report = nullptr);

struct FitSchedule {
  std::size_t max_passes = 40;
  double rel_tol = 1e-3;
  bool operator==(const FitSchedule&) const = default;
};

struct FitResult {
  TopicModelLevel model;
  std::vector<double> perplexity_trace;  // one entry per pass
  MStepReport repairs;
};

// Alternates full-corpus E/M passes until max_passes or until the relative
// perplexity change drops below rel_tol. Theta is reset to uniform unless it
// already matches `docs`.
FitResult fit(TopicModelLevel model, std::span<const Document> docs,
              const FitSchedule& schedule, const RegularizerConfig& reg);

double perplexity(const TopicModelLevel& model, std::span<const Document> docs);

// k largest phi entries of the column, descending, ties by lower word index.
std::vector<std::pair<std::string, double>> top_words(
    const TopicModelLevel& model, std::size_t topic, std::size_t k = 10);

}  // namespace topicmap

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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

namespace topicmap {

namespace {

constexpr std::size_t kBatchSize = 256;

[[noreturn]] void invalid(const std::string& message) {
  throw Error(ErrorCode::kInvalidArgument, message);
}

// Normalizes a column in place. Returns false (and leaves it untouched) when
// the column has no positive mass.
bool normalize_column(Eigen::Ref<Eigen::VectorXd> column) {
  const double sum = column.sum();
  if (!(sum > 0.0) || !std::isfinite(sum)) return false;
  column /= sum;
  return true;
}

void check_column(const Eigen::Ref<const Eigen::VectorXd>& column, double tol,
                  const char* what, Eigen::Index index) {
  if (column.size() == 0) return;
  if ((column.array() < 0.0).any() || !column.allFinite()) {
    invalid(std::string(what) + " column " + std::to_string(index) +
            " has negative or non-finite entries");
  }
  if (std::abs(column.sum() - 1.0) > tol) {
    invalid(std::string(what) + " column " + std::to_string(index) +
            " does not sum to 1");
  }
}

void check_documents(const TopicModelLevel& model,
                     std::span<const Document> docs) {
  const auto w = model.num_words();
  for (const auto& doc : docs) {
    for (const auto& tc : doc.counts) {
      if (tc.word >= w) {
        throw Error(ErrorCode::kVocabularyMismatch,
                    "document '" + doc.id + "' references word " +
                        std::to_string(tc.word) + " outside the model vocabulary");
      }
    }
  }
}

struct Accumulator {
  Eigen::MatrixXd n_wt_t;  // T x W, column w contiguous
  double processed = 0.0;
  double skipped = 0.0;
  std::size_t skipped_events = 0;
  double log_likelihood = 0.0;
};

// Shared E-step kernel. phi_t is phi transposed (T x W). n_td columns are
// written for the given documents only.
void accumulate(const Eigen::MatrixXd& phi_t, const Eigen::MatrixXd& theta,
                std::span<const Document> docs,
                std::span<const std::size_t> batch, Accumulator& acc,
                Eigen::MatrixXd& n_td) {
  const auto topics = phi_t.rows();
  Eigen::VectorXd p(topics);
  const double log_floor = std::log(kProbabilityFloor);
  for (const std::size_t d : batch) {
    const auto theta_d = theta.col(static_cast<Eigen::Index>(d));
    auto n_d = n_td.col(static_cast<Eigen::Index>(d));
    for (const auto& tc : docs[d].counts) {
      p = phi_t.col(tc.word).cwiseProduct(theta_d);
      const double denom = p.sum();
      if (!(denom > 0.0)) {
        acc.skipped += tc.count;
        ++acc.skipped_events;
        acc.log_likelihood += tc.count * log_floor;
        continue;
      }
      acc.processed += tc.count;
      acc.log_likelihood += tc.count * std::log(denom);
      p *= tc.count / denom;
      acc.n_wt_t.col(tc.word) += p;
      n_d += p;
    }
  }
}

void check_skipped(const Accumulator& acc) {
  const double total = acc.processed + acc.skipped;
  if (acc.skipped > kMaxSkippedFraction * total) {
    throw Error(ErrorCode::kZeroDenominator,
                std::to_string(acc.skipped_events) +
                    " (document, word) pairs have zero probability under the "
                    "model; the model is degenerate");
  }
}

SufficientStats to_stats(Accumulator&& acc, Eigen::MatrixXd&& n_td) {
  SufficientStats stats;
  stats.n_wt = acc.n_wt_t.transpose();
  stats.n_td = std::move(n_td);
  stats.processed_tokens = acc.processed;
  stats.skipped_tokens = acc.skipped;
  stats.skipped_events = acc.skipped_events;
  stats.log_likelihood = acc.log_likelihood;
  return stats;
}

Eigen::MatrixXd uniform_theta(std::size_t topics, std::size_t docs) {
  return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(topics),
                                   static_cast<Eigen::Index>(docs),
                                   1.0 / static_cast<double>(topics));
}

}  // namespace

void TopicConfig::validate() const {
  if (n_subject == 0) invalid("a topic level needs at least one subject topic");
}

void RegularizerConfig::validate() const {
  for (double v : {smooth_beta, smooth_alpha, sparse_beta}) {
    if (!std::isfinite(v) || v < 0.0) {
      invalid("regularizer strengths must be finite and non-negative");
    }
  }
  if (decorr_gamma && (!std::isfinite(*decorr_gamma) || *decorr_gamma < 0.0)) {
    invalid("decorrelation strength must be finite and non-negative");
  }
}

std::vector<std::size_t> TopicModelLevel::subject_topics() const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < roles.size(); ++t) {
    if (roles[t] == TopicRole::kSubject) out.push_back(t);
  }
  return out;
}

void TopicModelLevel::validate(double tol) const {
  if (static_cast<std::size_t>(phi.rows()) != vocabulary.size()) {
    invalid("phi row count does not match the vocabulary");
  }
  if (static_cast<std::size_t>(phi.cols()) != roles.size() ||
      static_cast<std::size_t>(n_t.size()) != roles.size()) {
    invalid("phi / n_t topic count does not match the roles");
  }
  if (theta.cols() > 0 && static_cast<std::size_t>(theta.rows()) != roles.size()) {
    invalid("theta row count does not match the roles");
  }
  if (static_cast<std::size_t>(theta.cols()) != doc_ids.size()) {
    invalid("theta column count does not match the document ids");
  }
  for (Eigen::Index t = 0; t < phi.cols(); ++t) {
    check_column(phi.col(t), tol, "phi", t);
  }
  for (Eigen::Index d = 0; d < theta.cols(); ++d) {
    check_column(theta.col(d), tol, "theta", d);
  }
  if ((n_t.array() < 0.0).any()) invalid("n_t has negative entries");
}

TopicModelLevel init_model(const Vocabulary& vocabulary,
                           const TopicConfig& config, const InitMode& init) {
  config.validate();
  if (vocabulary.empty()) {
    throw Error(ErrorCode::kEmptyVocabulary, "cannot build a model over an empty vocabulary");
  }
  const auto w = static_cast<Eigen::Index>(vocabulary.size());
  const auto t = static_cast<Eigen::Index>(config.total());

  TopicModelLevel model;
  model.vocabulary = vocabulary;
  model.theta.resize(t, 0);
  model.n_t = Eigen::VectorXd::Zero(t);

  if (const auto* random = std::get_if<RandomInit>(&init)) {
    model.roles.assign(config.n_subject, TopicRole::kSubject);
    model.roles.resize(config.total(), TopicRole::kBackground);
    std::mt19937_64 rng(random->seed);
    model.phi.resize(w, t);
    // Column-major fill so the draw order is fixed by (W, T, seed).
    for (Eigen::Index col = 0; col < t; ++col) {
      for (Eigen::Index row = 0; row < w; ++row) {
        model.phi(row, col) =
            static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
      }
      normalize_column(model.phi.col(col));
    }
    return model;
  }

  const TopicModelLevel& source = *std::get<WarmStart>(init).source;
  if (!vocabulary.has_prefix(source.vocabulary)) {
    throw Error(ErrorCode::kVocabularyMismatch,
                "warm-start source vocabulary is not an index prefix of the "
                "target vocabulary");
  }
  if (source.num_topics() != config.total()) {
    invalid("warm-start source has " + std::to_string(source.num_topics()) +
            " topics, config expects " + std::to_string(config.total()));
  }
  model.roles = source.roles;
  const auto shared = static_cast<Eigen::Index>(source.vocabulary.size());
  model.phi.resize(w, t);
  model.phi.topRows(shared) = source.phi;
  model.phi.bottomRows(w - shared).setConstant(kNewWordEpsilon);
  for (Eigen::Index col = 0; col < t; ++col) {
    if (!normalize_column(model.phi.col(col))) {
      model.phi.col(col).setConstant(1.0 / static_cast<double>(w));
    }
  }
  model.n_t = source.n_t;
  return model;
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& other) {
  n_wt += other.n_wt;
  n_td += other.n_td;
  processed_tokens += other.processed_tokens;
  skipped_tokens += other.skipped_tokens;
  skipped_events += other.skipped_events;
  log_likelihood += other.log_likelihood;
  return *this;
}

SufficientStats e_step(const TopicModelLevel& model,
                       std::span<const Document> docs,
                       std::span<const std::size_t> batch) {
  if (static_cast<std::size_t>(model.theta.cols()) != docs.size()) {
    invalid("theta has " + std::to_string(model.theta.cols()) +
            " columns but " + std::to_string(docs.size()) + " documents were given");
  }
  check_documents(model, docs);
  const auto t = model.phi.cols();
  const auto w = model.phi.rows();
  const Eigen::MatrixXd phi_t = model.phi.transpose();
  Accumulator acc{Eigen::MatrixXd::Zero(t, w)};
  Eigen::MatrixXd n_td = Eigen::MatrixXd::Zero(t, model.theta.cols());
  for (const auto d : batch) {
    if (d >= docs.size()) invalid("batch index out of range");
  }
  accumulate(phi_t, model.theta, docs, batch, acc, n_td);
  check_skipped(acc);
  return to_stats(std::move(acc), std::move(n_td));
}

SufficientStats e_step(const TopicModelLevel& model,
                       std::span<const Document> docs) {
  if (static_cast<std::size_t>(model.theta.cols()) != docs.size()) {
    invalid("theta has " + std::to_string(model.theta.cols()) +
            " columns but " + std::to_string(docs.size()) + " documents were given");
  }
  check_documents(model, docs);
  const auto t = model.phi.cols();
  const auto w = model.phi.rows();
  const Eigen::MatrixXd phi_t = model.phi.transpose();

  const std::size_t num_batches = (docs.size() + kBatchSize - 1) / kBatchSize;
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  // Each batch writes its own n_td columns; word counters are reduced in
  // batch order so the result does not depend on scheduling.
  Eigen::MatrixXd n_td = Eigen::MatrixXd::Zero(t, model.theta.cols());
  std::vector<Accumulator> partial(num_batches);
  auto run_batch = [&](std::size_t b) {
    partial[b].n_wt_t = Eigen::MatrixXd::Zero(t, w);
    const auto begin = b * kBatchSize;
    const auto end = std::min(docs.size(), begin + kBatchSize);
    accumulate(phi_t, model.theta, docs,
               std::span<const std::size_t>(order).subspan(begin, end - begin),
               partial[b], n_td);
  };

  const std::size_t workers = std::min<std::size_t>(
      num_batches, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t b = 0; b < num_batches; ++b) run_batch(b);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) {
      pool.emplace_back([&, k] {
        for (std::size_t b = k; b < num_batches; b += workers) run_batch(b);
      });
    }
    for (auto& th : pool) th.join();
  }

  Accumulator total{Eigen::MatrixXd::Zero(t, w)};
  for (auto& part : partial) {
    total.n_wt_t += part.n_wt_t;
    total.processed += part.processed;
    total.skipped += part.skipped;
    total.skipped_events += part.skipped_events;
    total.log_likelihood += part.log_likelihood;
  }
  check_skipped(total);
  return to_stats(std::move(total), std::move(n_td));
}

TopicModelLevel m_step(const TopicModelLevel& model,
                       const SufficientStats& stats,
                       const RegularizerConfig& reg, MStepReport* report) {
  reg.validate();
  const auto w = model.phi.rows();
  const auto t = model.phi.cols();
  if (stats.n_wt.rows() != w || stats.n_wt.cols() != t) {
    invalid("sufficient statistics do not match the model shape");
  }
  if (stats.n_td.rows() != t || stats.n_td.cols() != model.theta.cols()) {
    invalid("document statistics do not match theta");
  }

  const auto subjects = model.subject_topics();
  double gamma = 0.0;
  if (reg.decorr_gamma) {
    gamma = *reg.decorr_gamma;
  } else {
    const double mean_nt = stats.n_wt.sum() / static_cast<double>(t);
    gamma = 0.05 * mean_nt / static_cast<double>(w);
  }

  Eigen::VectorXd subject_row_sum = Eigen::VectorXd::Zero(w);
  if (gamma > 0.0) {
    for (const auto s : subjects) {
      subject_row_sum += model.phi.col(static_cast<Eigen::Index>(s));
    }
  }

  TopicModelLevel next;
  next.vocabulary = model.vocabulary;
  next.roles = model.roles;
  next.doc_ids = model.doc_ids;
  next.phi.resize(w, t);
  next.n_t = stats.n_wt.colwise().sum().transpose();

  MStepReport local;
  for (Eigen::Index col = 0; col < t; ++col) {
    auto out = next.phi.col(col);
    const auto n = stats.n_wt.col(col);
    if (model.roles[col] == TopicRole::kBackground) {
      out = (n.array() + reg.smooth_beta).max(0.0).matrix();
    } else {
      Eigen::ArrayXd r = Eigen::ArrayXd::Constant(w, -reg.sparse_beta);
      if (gamma > 0.0) {
        const auto phi_col = model.phi.col(col).array();
        r -= gamma * phi_col * (subject_row_sum.array() - phi_col);
      }
      out = (n.array() + r).max(0.0).matrix();
    }
    if (!normalize_column(out)) {
      out.setConstant(1.0 / static_cast<double>(w));
      ++local.phi_repairs;
    }
  }

  next.theta.resize(t, model.theta.cols());
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(t);
  for (Eigen::Index col = 0; col < t; ++col) {
    if (model.roles[col] == TopicRole::kBackground) alpha[col] = reg.smooth_alpha;
  }
  for (Eigen::Index d = 0; d < model.theta.cols(); ++d) {
    auto out = next.theta.col(d);
    out = (stats.n_td.col(d) + alpha).cwiseMax(0.0);
    if (!normalize_column(out)) {
      out.setConstant(1.0 / static_cast<double>(t));
      ++local.theta_repairs;
    }
  }

  if (report) {
    report->phi_repairs += local.phi_repairs;
    report->theta_repairs += local.theta_repairs;
  }
  return next;
}

FitResult fit(TopicModelLevel model, std::span<const Document> docs,
              const FitSchedule& schedule, const RegularizerConfig& reg) {
  if (docs.empty()) invalid("cannot fit a model on an empty corpus");
  if (schedule.max_passes == 0) invalid("max_passes must be positive");
  reg.validate();

  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (const auto& doc : docs) ids.push_back(doc.id);
  if (ids != model.doc_ids ||
      static_cast<std::size_t>(model.theta.rows()) != model.num_topics()) {
    model.theta = uniform_theta(model.num_topics(), docs.size());
    model.doc_ids = std::move(ids);
  }

  FitResult result;
  auto to_perplexity = [](const SufficientStats& s) {
    const double n = s.processed_tokens + s.skipped_tokens;
    return std::exp(-s.log_likelihood / n);
  };

  // The E-step of pass i+1 also yields the perplexity reached by pass i.
  for (std::size_t pass = 0; pass < schedule.max_passes; ++pass) {
    SufficientStats stats = e_step(model, docs);
    if (pass > 0) {
      result.perplexity_trace.push_back(to_perplexity(stats));
      const auto& trace = result.perplexity_trace;
      if (trace.size() >= 2) {
        const double prev = trace[trace.size() - 2];
        const double cur = trace.back();
        if (std::abs(prev - cur) / cur < schedule.rel_tol) {
          result.model = std::move(model);
          return result;
        }
      }
    }
    model = m_step(model, stats, reg, &result.repairs);
  }
  result.perplexity_trace.push_back(perplexity(model, docs));
  result.model = std::move(model);
  return result;
}

double perplexity(const TopicModelLevel& model, std::span<const Document> docs) {
  if (static_cast<std::size_t>(model.theta.cols()) != docs.size()) {
    invalid("perplexity needs one theta column per document");
  }
  check_documents(model, docs);
  double log_likelihood = 0.0;
  double n = 0.0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto theta_d = model.theta.col(static_cast<Eigen::Index>(d));
    for (const auto& tc : docs[d].counts) {
      double p = model.phi.row(tc.word).dot(theta_d);
      if (!(p > 0.0)) p = kProbabilityFloor;
      log_likelihood += tc.count * std::log(p);
      n += tc.count;
    }
  }
  return std::exp(-log_likelihood / n);
}

std::vector<std::pair<std::string, double>> top_words(
    const TopicModelLevel& model, std::size_t topic, std::size_t k) {
  if (topic >= model.num_topics()) invalid("topic index out of range");
  if (k == 0) invalid("k must be at least 1");
  const auto column = model.phi.col(static_cast<Eigen::Index>(topic));
  std::vector<WordId> ids(model.num_words());
  std::iota(ids.begin(), ids.end(), WordId{0});
  const auto take = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take),
                    ids.end(), [&](WordId a, WordId b) {
                      if (column[a] != column[b]) return column[a] > column[b];
                      return a < b;
                    });
  std::vector<std::pair<std::string, double>> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.emplace_back(model.vocabulary.token(ids[i]), column[ids[i]]);
  }
  return out;
}

}  // namespace topicmap

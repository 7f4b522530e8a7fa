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

#include "topicmap/persistence.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace topicmap {

namespace {

constexpr std::string_view kMagic = "TOPICMAP";
constexpr std::uint32_t kKindModel = 1;
constexpr std::uint32_t kKindBundle = 2;
constexpr std::size_t kHeaderSize = 32;

[[noreturn]] void corrupt(const std::string& why) {
  throw Error(ErrorCode::kCorruptBundle, why);
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    }
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    }
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  // A count that must fit in the remaining bytes at `min_bytes` each.
  std::size_t count(std::size_t min_bytes) {
    const auto n = u64();
    if (min_bytes > 0 && n > remaining() / min_bytes) corrupt("implausible element count");
    return static_cast<std::size_t>(n);
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > remaining()) corrupt("unexpected end of data");
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_matrix(ByteWriter& w, const Eigen::MatrixXd& m) {
  // Eigen's default storage is column-major.
  for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
}

Eigen::MatrixXd read_matrix(ByteReader& r, std::size_t rows, std::size_t cols) {
  if (cols > 0 && rows > r.remaining() / 8 / cols) corrupt("matrix exceeds payload");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
  return m;
}

void write_topic_config(ByteWriter& w, const TopicConfig& c) {
  w.u64(c.n_subject);
  w.u64(c.n_background);
  w.u64(c.seed);
}

TopicConfig read_topic_config(ByteReader& r) {
  TopicConfig c;
  c.n_subject = r.u64();
  c.n_background = r.u64();
  c.seed = r.u64();
  return c;
}

void write_reg(ByteWriter& w, const RegularizerConfig& reg) {
  w.f64(reg.smooth_beta);
  w.f64(reg.smooth_alpha);
  w.f64(reg.sparse_beta);
  w.u8(reg.decorr_gamma ? 1 : 0);
  w.f64(reg.decorr_gamma.value_or(0.0));
}

RegularizerConfig read_reg(ByteReader& r) {
  RegularizerConfig reg;
  reg.smooth_beta = r.f64();
  reg.smooth_alpha = r.f64();
  reg.sparse_beta = r.f64();
  const bool has = r.u8() != 0;
  const double gamma = r.f64();
  if (has) {
    reg.decorr_gamma = gamma;
  } else {
    reg.decorr_gamma.reset();
  }
  return reg;
}

void write_config(ByteWriter& w, const HierarchyConfig& c) {
  write_topic_config(w, c.level1);
  write_topic_config(w, c.level2);
  w.f64(c.pseudo_doc_weight);
  write_reg(w, c.reg1);
  write_reg(w, c.reg2);
  w.u64(c.schedule.max_passes);
  w.f64(c.schedule.rel_tol);
}

HierarchyConfig read_config(ByteReader& r) {
  HierarchyConfig c;
  c.level1 = read_topic_config(r);
  c.level2 = read_topic_config(r);
  c.pseudo_doc_weight = r.f64();
  c.reg1 = read_reg(r);
  c.reg2 = read_reg(r);
  c.schedule.max_passes = r.u64();
  c.schedule.rel_tol = r.f64();
  return c;
}

void write_level(ByteWriter& w, const TopicModelLevel& level) {
  w.u64(level.num_words());
  w.u64(level.num_topics());
  for (const auto role : level.roles) w.u8(static_cast<std::uint8_t>(role));
  w.u64(level.vocabulary.hash());
  for (const auto& token : level.vocabulary.entries()) w.str(token);
  write_matrix(w, level.phi);
  w.u64(level.doc_ids.size());
  for (const auto& id : level.doc_ids) w.str(id);
  write_matrix(w, level.theta);
  for (Eigen::Index t = 0; t < level.n_t.size(); ++t) w.f64(level.n_t[t]);
}

TopicModelLevel read_level(ByteReader& r) {
  TopicModelLevel level;
  const auto words = r.count(8);
  const auto topics = r.count(1);
  level.roles.reserve(topics);
  for (std::size_t t = 0; t < topics; ++t) {
    const auto role = r.u8();
    if (role > 1) corrupt("unknown topic role");
    level.roles.push_back(static_cast<TopicRole>(role));
  }
  const auto vocab_hash = r.u64();
  std::vector<std::string> entries;
  entries.reserve(words);
  for (std::size_t i = 0; i < words; ++i) entries.push_back(r.str());
  try {
    level.vocabulary = Vocabulary(std::move(entries));
  } catch (const Error& e) {
    corrupt(e.what());
  }
  if (level.vocabulary.hash() != vocab_hash) corrupt("vocabulary hash mismatch");
  level.phi = read_matrix(r, words, topics);
  const auto docs = r.count(8);
  level.doc_ids.reserve(docs);
  for (std::size_t i = 0; i < docs; ++i) level.doc_ids.push_back(r.str());
  level.theta = read_matrix(r, topics, docs);
  level.n_t.resize(static_cast<Eigen::Index>(topics));
  for (std::size_t t = 0; t < topics; ++t) level.n_t[static_cast<Eigen::Index>(t)] = r.f64();
  return level;
}

void write_model_payload(ByteWriter& w, const HierarchicalModel& model) {
  write_config(w, model.config);
  write_level(w, model.level1);
  write_level(w, model.level2);
  write_matrix(w, model.psi);
}

HierarchicalModel read_model_payload(ByteReader& r) {
  HierarchicalModel model;
  model.config = read_config(r);
  model.level1 = read_level(r);
  model.level2 = read_level(r);
  model.psi = read_matrix(r, model.level2.num_topics(), model.level1.num_topics());
  try {
    model.config.validate();
    model.validate();
  } catch (const Error& e) {
    corrupt(std::string("model invariants violated: ") + e.what());
  }
  return model;
}

std::string wrap(std::uint32_t kind, std::string payload) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kFormatVersion);
  w.u32(kind);
  w.u64(payload.size());
  w.u64(fnv1a64(payload));
  w.raw(payload);
  return w.take();
}

std::string_view unwrap(std::string_view bytes, std::uint32_t expected_kind) {
  if (bytes.size() < kHeaderSize) corrupt("file is shorter than the header");
  if (bytes.substr(0, kMagic.size()) != kMagic) corrupt("bad magic");
  ByteReader r(bytes.substr(kMagic.size(), kHeaderSize - kMagic.size()));
  const auto version = r.u32();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "format version " + std::to_string(version) +
                    " is not supported (expected " +
                    std::to_string(kFormatVersion) + ")");
  }
  const auto kind = r.u32();
  if (kind != expected_kind) corrupt("unexpected container kind");
  const auto size = r.u64();
  const auto checksum = r.u64();
  const auto payload = bytes.substr(kHeaderSize);
  if (payload.size() != size) corrupt("payload size mismatch (truncated file?)");
  if (fnv1a64(payload) != checksum) corrupt("payload checksum mismatch");
  return payload;
}

void write_profile(ByteWriter& w, const DocumentProfile& p) {
  w.str(p.doc_id);
  w.str(p.source);
  w.str(p.title_snippet);
  for (double v : p.level1_dist) w.f64(v);
  for (double v : p.level2_dist) w.f64(v);
}

DocumentProfile read_profile(ByteReader& r, std::size_t t1, std::size_t t2) {
  DocumentProfile p;
  p.doc_id = r.str();
  p.source = r.str();
  p.title_snippet = r.str();
  p.level1_dist.resize(t1);
  for (auto& v : p.level1_dist) v = r.f64();
  p.level2_dist.resize(t2);
  for (auto& v : p.level2_dist) v = r.f64();
  return p;
}

void check_distribution(const std::vector<double>& dist, const std::string& id) {
  double sum = 0.0;
  for (double v : dist) {
    if (!(v >= 0.0)) corrupt("profile '" + id + "' has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) corrupt("profile '" + id + "' is not normalized");
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_model(const HierarchicalModel& model) {
  ByteWriter w;
  write_model_payload(w, model);
  return wrap(kKindModel, w.take());
}

HierarchicalModel deserialize_model(std::string_view bytes) {
  ByteReader r(unwrap(bytes, kKindModel));
  auto model = read_model_payload(r);
  if (!r.done()) corrupt("trailing bytes after model");
  return model;
}

std::uint64_t model_hash(const HierarchicalModel& model) {
  return fnv1a64(serialize_model(model));
}

std::string serialize_bundle(const Bundle& bundle) {
  ByteWriter w;
  write_model_payload(w, bundle.model);
  w.u64(bundle.index.model_hash());
  w.u64(bundle.index.size());
  for (const auto& p : bundle.index.profiles()) write_profile(w, p);
  w.str(bundle.provenance);
  return wrap(kKindBundle, w.take());
}

Bundle deserialize_bundle(std::string_view bytes) {
  ByteReader r(unwrap(bytes, kKindBundle));
  Bundle bundle;
  bundle.model = read_model_payload(r);
  const auto hash = r.u64();
  const auto t1 = bundle.model.level1.num_topics();
  const auto t2 = bundle.model.level2.num_topics();
  const auto n = r.count(24 + 8 * (t1 + t2));
  std::vector<DocumentProfile> profiles;
  profiles.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    profiles.push_back(read_profile(r, t1, t2));
    check_distribution(profiles.back().level1_dist, profiles.back().doc_id);
    check_distribution(profiles.back().level2_dist, profiles.back().doc_id);
  }
  bundle.provenance = r.str();
  if (!r.done()) corrupt("trailing bytes after bundle");
  if (hash != model_hash(bundle.model)) corrupt("index does not belong to the bundled model");
  try {
    bundle.index = SearchIndex(std::move(profiles), hash);
  } catch (const Error& e) {
    corrupt(e.what());
  }
  return bundle;
}

void write_file_atomically(const std::filesystem::path& path,
                           std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::kIo, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename onto " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_hierarchical_model(const HierarchicalModel& model,
                             const std::filesystem::path& path) {
  write_file_atomically(path, serialize_model(model));
}

HierarchicalModel load_hierarchical_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

void save_bundle(const Bundle& bundle, const std::filesystem::path& path) {
  write_file_atomically(path, serialize_bundle(bundle));
}

Bundle load_bundle(const std::filesystem::path& path) {
  return deserialize_bundle(read_file(path));
}

nlohmann::json to_json(const HierarchyConfig& config) {
  auto level = [](const TopicConfig& c) {
    return nlohmann::json{{"n_subject", c.n_subject},
                          {"n_background", c.n_background},
                          {"seed", c.seed}};
  };
  auto reg = [](const RegularizerConfig& r) {
    nlohmann::json j{{"smooth_beta", r.smooth_beta},
                     {"smooth_alpha", r.smooth_alpha},
                     {"sparse_beta", r.sparse_beta}};
    if (r.decorr_gamma) {
      j["decorr_gamma"] = *r.decorr_gamma;
    } else {
      j["decorr_gamma"] = "auto";
    }
    return j;
  };
  return {{"level1", level(config.level1)},
          {"level2", level(config.level2)},
          {"pseudo_doc_weight", config.pseudo_doc_weight},
          {"reg1", reg(config.reg1)},
          {"reg2", reg(config.reg2)},
          {"max_passes", config.schedule.max_passes},
          {"rel_tol", config.schedule.rel_tol}};
}

}  // namespace topicmap

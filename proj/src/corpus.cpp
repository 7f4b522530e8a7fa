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

#include "topicmap/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace topicmap {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kMalformedLine: return "malformed_line";
    case ErrorCode::kDuplicateDocId: return "duplicate_doc_id";
    case ErrorCode::kEmptyDocumentAfterProjection:
      return "empty_document_after_projection";
    case ErrorCode::kEmptyVocabulary: return "empty_vocabulary";
    case ErrorCode::kVocabularyMismatch: return "vocabulary_mismatch";
    case ErrorCode::kZeroDenominator: return "zero_denominator";
    case ErrorCode::kScheduleEmpty: return "schedule_empty";
    case ErrorCode::kMalformedEmbeddingLine: return "malformed_embedding_line";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kTooFewEmbeddedWords: return "too_few_embedded_words";
    case ErrorCode::kQueryEmptyAfterProjection:
      return "query_empty_after_projection";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kCorruptBundle: return "corrupt_bundle";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one code point starting at text[pos] and advances pos. Invalid
// sequences decode to U+FFFD and consume one byte.
char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto lead = static_cast<unsigned char>(text[pos]);
  if (lead < 0x80) {
    ++pos;
    return lead;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    ++pos;
    return kReplacement;
  }
  if (pos + extra >= text.size()) {
    ++pos;
    return kReplacement;
  }
  for (int i = 1; i <= extra; ++i) {
    const auto byte = static_cast<unsigned char>(text[pos + i]);
    if ((byte & 0xC0) != 0x80) {
      ++pos;
      return kReplacement;
    }
    cp = (cp << 6) | (byte & 0x3F);
  }
  pos += extra + 1;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool in_range(char32_t cp, char32_t lo, char32_t hi) {
  return cp >= lo && cp <= hi;
}

// Without a unicode database, every non-ASCII code point counts as a word
// character except the punctuation, symbol and space blocks below.
bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
           (cp >= 'A' && cp <= 'Z');
  }
  if (cp == kReplacement || cp == 0xFEFF) return false;
  if (in_range(cp, 0x80, 0xBF)) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (in_range(cp, 0x2000, 0x2BFF)) return false;
  if (in_range(cp, 0x2E00, 0x2E7F)) return false;
  if (in_range(cp, 0x3000, 0x303F)) return false;
  if (in_range(cp, 0xFE30, 0xFE4F)) return false;
  if (in_range(cp, 0xFF00, 0xFF0F) || in_range(cp, 0xFF1A, 0xFF20) ||
      in_range(cp, 0xFF3B, 0xFF40) || in_range(cp, 0xFF5B, 0xFF65)) {
    return false;
  }
  if (in_range(cp, 0x1F000, 0x1FAFF)) return false;
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp < 0x80) return cp;
  if (in_range(cp, 0xC0, 0xDE) && cp != 0xD7) return cp + 0x20;
  if (in_range(cp, 0x100, 0x137) || in_range(cp, 0x14A, 0x177)) {
    return cp | 1;
  }
  if (in_range(cp, 0x139, 0x148) || in_range(cp, 0x179, 0x17E)) {
    return (cp & 1) ? cp + 1 : cp;
  }
  if (cp == 0x178) return 0xFF;
  if (cp == 0x386) return 0x3AC;
  if (in_range(cp, 0x388, 0x38A)) return cp + 0x25;
  if (cp == 0x38C) return 0x3CC;
  if (cp == 0x38E || cp == 0x38F) return cp + 0x3F;
  if (in_range(cp, 0x391, 0x3A9) && cp != 0x3A2) return cp + 0x20;
  if (in_range(cp, 0x400, 0x40F)) return cp + 0x50;
  if (in_range(cp, 0x410, 0x42F)) return cp + 0x20;
  if (in_range(cp, 0x460, 0x481) || in_range(cp, 0x48A, 0x4BF) ||
      in_range(cp, 0x4D0, 0x52F)) {
    return cp | 1;
  }
  if (in_range(cp, 0x531, 0x556)) return cp + 0x30;
  if (in_range(cp, 0x1E00, 0x1E95) || in_range(cp, 0x1EA0, 0x1EFF)) {
    return cp | 1;
  }
  if (in_range(cp, 0xFF21, 0xFF3A)) return cp + 0x20;
  return cp;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
         c == '\f';
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::kMalformedLine,
              "line " + std::to_string(line_no) + ": " + why);
}

struct RawLine {
  std::string id;
  std::string source;
  std::vector<std::pair<std::string, long long>> terms;
};

// Parses a corpus line. Returns nullopt for blank lines.
std::optional<RawLine> parse_line(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.find_first_not_of(" \t") == std::string_view::npos) {
    return std::nullopt;
  }
  const auto fields = split(line, '\t');
  if (fields.size() != 3) malformed(line_no, "expected 3 tab-separated fields");
  RawLine raw;
  raw.id = std::string(fields[0]);
  raw.source = std::string(fields[1]);
  if (raw.id.empty()) malformed(line_no, "empty document id");
  if (raw.source.empty()) malformed(line_no, "empty source tag");
  for (auto c : raw.id) {
    if (is_space(c)) malformed(line_no, "whitespace in document id");
  }
  const auto terms = split_whitespace(fields[2]);
  if (terms.empty()) malformed(line_no, "document has no tokens");
  for (auto term : terms) {
    const auto colon = term.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
      malformed(line_no, "expected token:count, got '" + std::string(term) + "'");
    }
    const auto token = term.substr(0, colon);
    if (token.find(':') != std::string_view::npos) {
      malformed(line_no, "token contains ':'");
    }
    const auto digits = term.substr(colon + 1);
    long long count = 0;
    const auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), count);
    if (digits.empty() || ec != std::errc() ||
        ptr != digits.data() + digits.size() || count <= 0) {
      malformed(line_no, "count must be a positive integer in '" +
                             std::string(term) + "'");
    }
    raw.terms.emplace_back(std::string(token), count);
  }
  return raw;
}

// Sums duplicate words and sorts by word id.
std::vector<TermCount> normalize_counts(std::vector<TermCount> counts) {
  std::sort(counts.begin(), counts.end(),
            [](const TermCount& a, const TermCount& b) { return a.word < b.word; });
  std::vector<TermCount> out;
  for (const auto& tc : counts) {
    if (!out.empty() && out.back().word == tc.word) {
      out.back().count += tc.count;
    } else {
      out.push_back(tc);
    }
  }
  return out;
}

}  // namespace

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    decode_utf8(text, pos);
    ++n;
  }
  return n;
}

std::vector<std::string> tokenize(std::string_view raw_text,
                                  const TokenizerConfig& config) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t current_len = 0;
  auto flush = [&] {
    if (current_len >= config.min_len && !current.empty() &&
        !config.stopwords.contains(current)) {
      tokens.push_back(current);
    }
    current.clear();
    current_len = 0;
  };
  std::size_t pos = 0;
  while (pos < raw_text.size()) {
    const char32_t cp = decode_utf8(raw_text, pos);
    if (is_word_char(cp)) {
      encode_utf8(to_lower(cp), current);
      ++current_len;
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> entries, bool frozen)
    : entries_(std::move(entries)) {
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto [it, inserted] =
        index_.emplace(entries_[i], static_cast<WordId>(i));
    if (!inserted) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate vocabulary entry '" + entries_[i] + "'");
    }
  }
  frozen_ = frozen;
}

std::optional<WordId> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<WordId> Vocabulary::add(const std::string& token) {
  if (const auto it = index_.find(token); it != index_.end()) return it->second;
  if (frozen_) return std::nullopt;
  const auto id = static_cast<WordId>(entries_.size());
  entries_.push_back(token);
  index_.emplace(token, id);
  return id;
}

bool Vocabulary::has_prefix(const Vocabulary& prefix) const {
  if (prefix.size() > size()) return false;
  return std::equal(prefix.entries_.begin(), prefix.entries_.end(),
                    entries_.begin());
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& e : entries_) {
    h = fnv1a(e, h);
    h = fnv1a(std::string_view("\n", 1), h);
  }
  return h;
}

double Document::length() const {
  double n = 0.0;
  for (const auto& tc : counts) n += tc.count;
  return n;
}

double Corpus::total_tokens() const {
  double n = 0.0;
  for (const auto& d : documents) n += d.length();
  return n;
}

Corpus parse_corpus_file(std::istream& in, const VocabularyMode& mode) {
  Corpus corpus;
  if (mode.fixed) {
    corpus.vocabulary = *mode.fixed;
    corpus.vocabulary.freeze();
  }
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto raw = parse_line(line, line_no);
    if (!raw) continue;
    if (!seen_ids.insert(raw->id).second) {
      throw Error(ErrorCode::kDuplicateDocId, "duplicate document id '" +
                                                  raw->id + "' at line " +
                                                  std::to_string(line_no));
    }
    Document doc;
    doc.id = std::move(raw->id);
    doc.source = std::move(raw->source);
    std::vector<TermCount> counts;
    for (const auto& [token, count] : raw->terms) {
      if (const auto id = corpus.vocabulary.add(token)) {
        counts.push_back({*id, static_cast<double>(count)});
      } else {
        corpus.oov_dropped += static_cast<double>(count);
      }
    }
    if (counts.empty()) {
      throw Error(ErrorCode::kEmptyDocumentAfterProjection,
                  "document '" + doc.id + "' has no in-vocabulary tokens");
    }
    doc.counts = normalize_counts(std::move(counts));
    corpus.source_tags.insert(doc.source);
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

void write_corpus_file(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus.documents) {
    out << doc.id << '\t' << doc.source << '\t';
    bool first = true;
    for (const auto& tc : doc.counts) {
      const auto n = static_cast<long long>(tc.count);
      if (static_cast<double>(n) != tc.count || n <= 0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "document '" + doc.id + "' has a non-integral count");
      }
      if (!first) out << ' ';
      out << corpus.vocabulary.token(tc.word) << ':' << n;
      first = false;
    }
    out << '\n';
  }
}

Vocabulary build_vocabulary(std::istream& corpus_stream,
                            const PruneConfig& prune) {
  struct Stats {
    std::size_t df = 0;
    long long total = 0;
  };
  std::map<std::string, Stats> stats;
  std::size_t num_docs = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(corpus_stream, line)) {
    ++line_no;
    const auto raw = parse_line(line, line_no);
    if (!raw) continue;
    ++num_docs;
    std::unordered_set<std::string> in_doc;
    for (const auto& [token, count] : raw->terms) {
      auto& s = stats[token];
      s.total += count;
      if (in_doc.insert(token).second) ++s.df;
    }
  }
  std::vector<std::pair<std::string, Stats>> kept;
  for (const auto& [token, s] : stats) {
    if (prune.stopwords.contains(token)) continue;
    if (s.df < prune.min_df) continue;
    if (static_cast<double>(s.df) >
        prune.max_df_fraction * static_cast<double>(num_docs)) {
      continue;
    }
    kept.emplace_back(token, s);
  }
  if (kept.empty()) {
    throw Error(ErrorCode::kEmptyVocabulary,
                "no token survived vocabulary pruning");
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second.total != b.second.total) return a.second.total > b.second.total;
    return a.first < b.first;
  });
  std::vector<std::string> entries;
  entries.reserve(kept.size());
  for (auto& [token, s] : kept) entries.push_back(token);
  return Vocabulary(std::move(entries));
}

ProjectionResult project_corpus(const Corpus& corpus,
                                const Vocabulary& vocabulary) {
  ProjectionResult result;
  result.corpus.vocabulary = vocabulary;
  result.corpus.vocabulary.freeze();
  result.corpus.oov_dropped = corpus.oov_dropped;
  std::vector<std::optional<WordId>> remap(corpus.vocabulary.size());
  for (std::size_t i = 0; i < remap.size(); ++i) {
    remap[i] = vocabulary.find(corpus.vocabulary.token(static_cast<WordId>(i)));
  }
  for (const auto& doc : corpus.documents) {
    std::vector<TermCount> counts;
    for (const auto& tc : doc.counts) {
      if (remap[tc.word]) {
        counts.push_back({*remap[tc.word], tc.count});
      } else {
        result.corpus.oov_dropped += tc.count;
      }
    }
    if (counts.empty()) {
      result.dropped_ids.push_back(doc.id);
      continue;
    }
    Document projected{doc.id, doc.source, normalize_counts(std::move(counts))};
    result.corpus.source_tags.insert(projected.source);
    result.corpus.documents.push_back(std::move(projected));
  }
  return result;
}

Corpus compact_vocabulary(const Corpus& corpus) {
  std::vector<bool> used(corpus.vocabulary.size(), false);
  for (const auto& doc : corpus.documents) {
    for (const auto& tc : doc.counts) used[tc.word] = true;
  }
  std::vector<std::string> entries;
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (used[i]) entries.push_back(corpus.vocabulary.token(static_cast<WordId>(i)));
  }
  Vocabulary compact(std::move(entries), corpus.vocabulary.frozen());
  return project_corpus(corpus, compact).corpus;
}

MergeResult merge_corpora(const Corpus& initial, const Corpus& added,
                          VocabPolicy policy) {
  std::unordered_set<std::string> ids;
  for (const auto& doc : initial.documents) ids.insert(doc.id);
  for (const auto& doc : added.documents) {
    if (ids.contains(doc.id)) {
      throw Error(ErrorCode::kDuplicateDocId,
                  "document id '" + doc.id + "' occurs in both corpora");
    }
  }

  MergeResult result;
  Vocabulary vocabulary(initial.vocabulary.entries());
  if (policy == VocabPolicy::kUnion) {
    for (const auto& token : added.vocabulary.entries()) vocabulary.add(token);
  } else {
    vocabulary.freeze();
  }

  auto projected = project_corpus(added, vocabulary);
  result.dropped_documents = projected.dropped_ids.size();

  Corpus& merged = result.corpus;
  merged.vocabulary = vocabulary;
  merged.documents = initial.documents;
  merged.source_tags = initial.source_tags;
  merged.oov_dropped = initial.oov_dropped + projected.corpus.oov_dropped;
  for (auto& doc : projected.corpus.documents) {
    merged.source_tags.insert(doc.source);
    merged.documents.push_back(std::move(doc));
  }
  return result;
}

}  // namespace topicmap

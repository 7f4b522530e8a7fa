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

// Bag-of-words ingestion: tokenizer, vocabulary, corpus file parsing and
// merging of corpora coming from different sources.
//
// Corpus file format, one document per line:
//
//   doc_id<TAB>source_tag<TAB>token:count token:count ...
//
// Counts are positive decimal integers. Tokens may not contain ':', TAB or
// whitespace.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "topicmap/error.hpp"

namespace topicmap {

using WordId = std::uint32_t;

struct TokenizerConfig {
  // Minimum token length in unicode code points.
  std::size_t min_len = 3;
  std::unordered_set<std::string> stopwords;
};

// Lowercases and splits on non-alphanumeric code points. Input is UTF-8.
std::vector<std::string> tokenize(std::string_view raw_text,
                                  const TokenizerConfig& config = {});

// Number of unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text);

// Token <-> index map. Once frozen, insertions are rejected (the token is
// treated as a stopword by callers).
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> entries, bool frozen = false);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  const std::vector<std::string>& entries() const { return entries_; }
  const std::string& token(WordId id) const { return entries_.at(id); }
  std::optional<WordId> find(std::string_view token) const;

  // Returns the index of `token`, inserting it when the vocabulary is not
  // frozen. Returns nullopt for unseen tokens of a frozen vocabulary.
  std::optional<WordId> add(const std::string& token);

  // True when every entry of `prefix` sits at the same index here.
  bool has_prefix(const Vocabulary& prefix) const;

  // FNV-1a over the ordered entries. Independent of the frozen flag.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& other) const {
    return entries_ == other.entries_;
  }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, WordId> index_;
  bool frozen_ = false;
};

struct TermCount {
  WordId word;
  // Ingested counts are integral; pseudo-documents carry fractional mass.
  double count;

  bool operator==(const TermCount&) const = default;
};

struct Document {
  std::string id;
  std::string source;
  // Sorted by word, no duplicates, every count > 0.
  std::vector<TermCount> counts;

  double length() const;
  bool operator==(const Document&) const = default;
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<Document> documents;
  std::set<std::string> source_tags;
  // Tokens dropped because the vocabulary was frozen (summed counts).
  double oov_dropped = 0.0;

  std::size_t size() const { return documents.size(); }
  double total_tokens() const;
};

// Selects how parse_corpus_file treats unseen tokens.
struct VocabularyMode {
  static VocabularyMode grow() { return VocabularyMode{}; }
  static VocabularyMode frozen(Vocabulary vocabulary) {
    vocabulary.freeze();
    return VocabularyMode{std::move(vocabulary)};
  }

  // Empty for grow mode.
  std::optional<Vocabulary> fixed;
};

// Throws kMalformedLine, kDuplicateDocId, kEmptyDocumentAfterProjection.
Corpus parse_corpus_file(std::istream& in,
                         const VocabularyMode& mode = VocabularyMode::grow());

// Inverse of parse_corpus_file for integral corpora. Lines follow document
// order; tokens within a line follow vocabulary index order.
void write_corpus_file(std::ostream& out, const Corpus& corpus);

struct PruneConfig {
  std::size_t min_df = 2;
  double max_df_fraction = 0.5;
  std::unordered_set<std::string> stopwords;
};

// Reads a corpus file and keeps tokens with min_df <= df and
// df / num_docs <= max_df_fraction, ordered by descending total count with
// lexicographic ties. Throws kEmptyVocabulary.
Vocabulary build_vocabulary(std::istream& corpus_stream,
                            const PruneConfig& prune = {});

struct ProjectionResult {
  Corpus corpus;
  std::vector<std::string> dropped_ids;
};

// Re-indexes `corpus` against a frozen copy of `vocabulary`, dropping unseen
// tokens and any document left empty.
ProjectionResult project_corpus(const Corpus& corpus,
                                const Vocabulary& vocabulary);

// Restricts a corpus vocabulary to the tokens its documents use, keeping the
// relative order of the survivors.
Corpus compact_vocabulary(const Corpus& corpus);

enum class VocabPolicy { kUnion, kKeepInitial };

struct MergeResult {
  Corpus corpus;
  std::size_t dropped_documents = 0;
};

// Concatenates `initial` and `added`. Under kUnion the initial vocabulary is
// kept as an index prefix and added-only tokens are appended; under
// kKeepInitial the initial vocabulary is frozen and added documents are
// re-projected. Throws kDuplicateDocId.
MergeResult merge_corpora(const Corpus& initial, const Corpus& added,
                          VocabPolicy policy);

}  // namespace topicmap

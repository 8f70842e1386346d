// Copyright 2026 The EGRM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tokenization, vocabulary, parallel corpus I/O and the synthetic
// query/title/keyword generator.

#ifndef EGRM_CORPUS_H_
#define EGRM_CORPUS_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "egrm/common.h"

namespace egrm {

// Lowercases and splits on Unicode whitespace. Invalid UTF-8 bytes are kept
// as-is inside tokens.
std::vector<std::string> tokenize(std::string_view text);

// Joins tokens with single spaces. tokenize(join_tokens(t)) == t for tokens
// produced by tokenize.
std::string join_tokens(std::span<const std::string> tokens);

// Normalized form of a free-text query: tokenize + join.
std::string normalize_text(std::string_view text);

class Vocabulary {
 public:
  static constexpr const char* kBosToken = "<s>";
  static constexpr const char* kEosToken = "<e>";
  static constexpr const char* kUnkToken = "<unk>";

  // Reserved entries only.
  Vocabulary();
  // `tokens` are the non-reserved entries, assigned ids 3, 4, ... in order.
  // Duplicates and reserved spellings are rejected.
  explicit Vocabulary(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return id_to_token_.size(); }

  TokenSeq encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;
  // tokenize + encode.
  TokenSeq encode_text(std::string_view text) const;
  // decode + join with spaces.
  std::string render(std::span<const TokenId> ids) const;

  // One token per line; the first three lines are the reserved tokens.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::unordered_map<std::string, TokenId, Hash, std::equal_to<>> token_to_id_;
  std::vector<std::string> id_to_token_;
};

TokenSeq encode_tokens(const Vocabulary& vocab,
                       std::span<const std::string> tokens);

struct RawPair {
  std::string source;
  std::string target;
};

struct ParallelPair {
  TokenSeq source;
  TokenSeq target;
};

// Keeps the reserved entries plus the (max_size - 3) most frequent tokens of
// both sides of the corpus. Ties break lexicographically ascending.
Vocabulary build_vocab(std::span<const RawPair> corpus, std::size_t max_size);

// Pairs whose source or target encodes to an empty sequence are dropped.
std::vector<ParallelPair> encode_corpus(const Vocabulary& vocab,
                                        std::span<const RawPair> corpus);

// Applied to every target on ingestion. Real click-log titles may need
// trimming; the default passes text through.
using TitleFilter = std::function<std::string(std::string_view)>;

// TAB-separated "source<TAB>target" lines. Blank lines are skipped.
std::vector<RawPair> read_corpus(const std::string& path,
                                 const TitleFilter& filter = {});
void write_corpus(const std::string& path, std::span<const RawPair> corpus);

// One entry per non-blank line.
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, std::span<const std::string> lines);

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t num_pairs = 20000;
  std::size_t keyword_count = 10000;
  std::size_t template_count = 6;
  double overlap_fraction = 0.5;
};

struct SyntheticData {
  std::vector<RawPair> corpus;
  std::vector<std::string> keywords;
};

// Number of query paraphrase templates the generator knows.
std::size_t synthetic_template_limit();

// Builds a template-grammar keyword set and a query->title corpus. Exactly
// round(overlap_fraction * keyword_count) keywords occur verbatim as titles;
// every other title carries a filler token that no keyword uses.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Fresh queries paraphrasing keywords from the title-reachable subset, for
// benchmarking and workload replay. Deterministic in (spec, count, salt).
std::vector<std::string> synthetic_queries(const SyntheticSpec& spec,
                                           std::size_t count,
                                           std::uint64_t salt = 1);

// `draws` samples from a Zipf(exponent) law over `queries` by rank.
std::vector<std::string> zipf_workload(std::span<const std::string> queries,
                                       std::size_t draws, double exponent,
                                       std::uint64_t seed);

}  // namespace egrm

#endif  // EGRM_CORPUS_H_

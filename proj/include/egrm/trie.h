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

#ifndef EGRM_TRIE_H_
#define EGRM_TRIE_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egrm/common.h"
#include "egrm/corpus.h"

namespace egrm {

// Token-keyed prefix tree over a closed keyword set. Nodes live in a flat
// array; children are kept sorted by token id. A node that ends a keyword is
// terminal, and reports EOS among its valid suffixes.
class KeywordTrie {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kRoot = 0;

  struct LayerStat {
    std::size_t depth = 0;
    std::size_t nodes = 0;
    double avg_suffixes = 0.0;
  };

  // Rejects an empty list, empty keywords and keywords containing reserved
  // ids. Duplicates are inserted once.
  static KeywordTrie build(std::span<const TokenSeq> keywords);

  // Node reached by following `token` out of `node`, if any.
  std::optional<NodeId> child(NodeId node, TokenId token) const;
  // Node reached by walking `path` from the root, if any.
  std::optional<NodeId> find(std::span<const TokenId> path) const;

  // Children token ids in ascending order, preceded by EOS when the node is
  // terminal (EOS has the smallest non-BOS id).
  std::vector<TokenId> suffixes(NodeId node) const;
  std::size_t suffix_count(NodeId node) const;
  bool terminal(NodeId node) const { return nodes_[node].terminal; }

  std::vector<TokenId> valid_suffixes(std::span<const TokenId> path) const;
  bool contains(std::span<const TokenId> keyword) const;
  std::vector<LayerStat> layer_stats() const;

  // Every keyword in the trie, in lexicographic token order.
  std::vector<TokenSeq> enumerate() const;

  std::size_t keyword_count() const { return keyword_count_; }
  std::size_t max_depth() const { return max_depth_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<std::pair<TokenId, NodeId>> children;
    bool terminal = false;
  };

  std::vector<Node> nodes_;
  std::size_t keyword_count_ = 0;
  std::size_t max_depth_ = 0;
};

inline KeywordTrie build_trie(std::span<const TokenSeq> keywords) {
  return KeywordTrie::build(keywords);
}

// Encodes raw keyword lines. Keywords that tokenize to nothing or contain an
// out-of-vocabulary token cannot be produced by the decoder; they are left
// out and counted in `skipped`.
std::vector<TokenSeq> encode_keywords(const Vocabulary& vocab,
                                      std::span<const std::string> keywords,
                                      std::size_t* skipped = nullptr);

// "depth,avg_suffixes" CSV.
void write_layer_stats_csv(std::ostream& out,
                           std::span<const KeywordTrie::LayerStat> stats);

}  // namespace egrm

#endif  // EGRM_TRIE_H_

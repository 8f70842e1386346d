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

#include "egrm/trie.h"

#include <algorithm>
#include <ostream>

namespace egrm {

KeywordTrie KeywordTrie::build(std::span<const TokenSeq> keywords) {
  if (keywords.empty()) throw Error("build_trie: keyword set is empty");
  KeywordTrie trie;
  trie.nodes_.emplace_back();
  for (const auto& kw : keywords) {
    if (kw.empty()) throw Error("build_trie: empty keyword");
    NodeId node = kRoot;
    for (TokenId tok : kw) {
      if (tok < kNumReserved)
        throw Error("build_trie: keyword contains reserved id " +
                    std::to_string(tok));
      auto& children = trie.nodes_[node].children;
      auto it = std::lower_bound(
          children.begin(), children.end(), tok,
          [](const auto& entry, TokenId t) { return entry.first < t; });
      if (it != children.end() && it->first == tok) {
        node = it->second;
      } else {
        const auto next = static_cast<NodeId>(trie.nodes_.size());
        children.insert(it, {tok, next});
        // `children` may dangle after this push_back.
        trie.nodes_.emplace_back();
        node = next;
      }
    }
    if (!trie.nodes_[node].terminal) {
      trie.nodes_[node].terminal = true;
      ++trie.keyword_count_;
      trie.max_depth_ = std::max(trie.max_depth_, kw.size());
    }
  }
  return trie;
}

std::optional<KeywordTrie::NodeId> KeywordTrie::child(NodeId node,
                                                      TokenId token) const {
  const auto& children = nodes_[node].children;
  auto it = std::lower_bound(
      children.begin(), children.end(), token,
      [](const auto& entry, TokenId t) { return entry.first < t; });
  if (it == children.end() || it->first != token) return std::nullopt;
  return it->second;
}

std::optional<KeywordTrie::NodeId> KeywordTrie::find(
    std::span<const TokenId> path) const {
  NodeId node = kRoot;
  for (TokenId tok : path) {
    auto next = child(node, tok);
    if (!next) return std::nullopt;
    node = *next;
  }
  return node;
}

std::vector<TokenId> KeywordTrie::suffixes(NodeId node) const {
  const Node& n = nodes_[node];
  std::vector<TokenId> out;
  out.reserve(n.children.size() + 1);
  if (n.terminal) out.push_back(kEosId);
  for (const auto& [tok, _] : n.children) out.push_back(tok);
  return out;
}

std::size_t KeywordTrie::suffix_count(NodeId node) const {
  return nodes_[node].children.size() + (nodes_[node].terminal ? 1 : 0);
}

std::vector<TokenId> KeywordTrie::valid_suffixes(
    std::span<const TokenId> path) const {
  auto node = find(path);
  if (!node) return {};
  return suffixes(*node);
}

bool KeywordTrie::contains(std::span<const TokenId> keyword) const {
  if (keyword.empty()) return false;
  auto node = find(keyword);
  return node && nodes_[*node].terminal;
}

std::vector<KeywordTrie::LayerStat> KeywordTrie::layer_stats() const {
  std::vector<LayerStat> stats;
  std::vector<NodeId> layer{kRoot};
  for (std::size_t depth = 0; !layer.empty(); ++depth) {
    std::size_t total = 0;
    std::vector<NodeId> next;
    for (NodeId id : layer) {
      total += suffix_count(id);
      for (const auto& [_, c] : nodes_[id].children) next.push_back(c);
    }
    stats.push_back({depth, layer.size(),
                     static_cast<double>(total) /
                         static_cast<double>(layer.size())});
    layer = std::move(next);
  }
  return stats;
}

std::vector<TokenSeq> KeywordTrie::enumerate() const {
  std::vector<TokenSeq> out;
  TokenSeq path;
  // Iterative DFS; stack holds (node, next child index).
  std::vector<std::pair<NodeId, std::size_t>> stack{{kRoot, 0}};
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx == 0 && nodes_[node].terminal && !path.empty()) out.push_back(path);
    if (idx < nodes_[node].children.size()) {
      const auto [tok, next] = nodes_[node].children[idx++];
      path.push_back(tok);
      stack.push_back({next, 0});
    } else {
      stack.pop_back();
      if (!path.empty()) path.pop_back();
    }
  }
  return out;
}

std::vector<TokenSeq> encode_keywords(const Vocabulary& vocab,
                                      std::span<const std::string> keywords,
                                      std::size_t* skipped) {
  std::vector<TokenSeq> out;
  out.reserve(keywords.size());
  std::size_t dropped = 0;
  for (const auto& kw : keywords) {
    TokenSeq ids = vocab.encode_text(kw);
    if (ids.empty() ||
        std::find(ids.begin(), ids.end(), kUnkId) != ids.end()) {
      ++dropped;
      continue;
    }
    out.push_back(std::move(ids));
  }
  if (skipped) *skipped = dropped;
  return out;
}

void write_layer_stats_csv(std::ostream& out,
                           std::span<const KeywordTrie::LayerStat> stats) {
  out << "depth,avg_suffixes\n";
  for (const auto& s : stats) out << s.depth << ',' << s.avg_suffixes << '\n';
}

}  // namespace egrm

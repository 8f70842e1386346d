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

#include "egrm/decode.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include <json.hpp>

namespace egrm {

void BeamConfig::validate() const {
  if (beam_size < 1) throw Error("beam config: beam_size must be at least 1");
  if (std::isnan(score_threshold))
    throw Error("beam config: score_threshold is NaN");
}

std::size_t default_max_steps(const KeywordTrie& trie) {
  return 2 * trie.max_depth() + 2;
}

namespace {

struct Hypothesis {
  TokenSeq path;
  double score = 0.0;
  // State before consuming `last`.
  std::shared_ptr<const DecoderState> state;
  TokenId last = kBosId;
  KeywordTrie::NodeId node = KeywordTrie::kRoot;
};

struct Candidate {
  std::size_t parent;
  TokenId token;
  double score;
};

bool path_less(std::span<const TokenId> a, std::span<const TokenId> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Orders extensions by score descending, then by the token sequence
// [parent path; token] ascending.
class CandidateOrder {
 public:
  explicit CandidateOrder(const std::vector<Hypothesis>& beam) : beam_(beam) {}

  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.score != b.score) return a.score > b.score;
    const TokenSeq& pa = beam_[a.parent].path;
    const TokenSeq& pb = beam_[b.parent].path;
    const std::size_t la = pa.size() + 1, lb = pb.size() + 1;
    for (std::size_t i = 0; i < std::min(la, lb); ++i) {
      const TokenId ta = i < pa.size() ? pa[i] : a.token;
      const TokenId tb = i < pb.size() ? pb[i] : b.token;
      if (ta != tb) return ta < tb;
    }
    return la < lb;
  }

 private:
  const std::vector<Hypothesis>& beam_;
};

}  // namespace

std::vector<DecodeResult> beam_search(const Parameters& params,
                                      std::span<const TokenId> query,
                                      const KeywordTrie* trie,
                                      const BeamConfig& config,
                                      DecodeStats* stats) {
  config.validate();
  if (query.empty()) throw Error("beam_search: empty query");
  if (config.use_trie && trie == nullptr)
    throw Error("beam_search: trie mode requires a keyword trie");
  std::size_t max_steps = config.max_steps;
  if (max_steps == 0) {
    if (trie == nullptr)
      throw Error("beam_search: max_steps must be set when no trie is given");
    max_steps = default_max_steps(*trie);
  }

  const std::size_t B = config.beam_size;
  const double s_min = config.score_threshold;
  const std::uint32_t V = params.config().vocab_size;
  const ScoreMode mode =
      config.use_self_norm ? ScoreMode::kSelfNorm : ScoreMode::kExactSoftmax;

  DecodeStats local_stats;
  DecodeStats& st = stats ? *stats : local_stats;
  st = DecodeStats{};

  const EncoderStates enc = encode(params, query);
  std::vector<Hypothesis> beam;
  beam.push_back({{},
                  0.0,
                  std::make_shared<const DecoderState>(initial_state(params, enc)),
                  kBosId,
                  KeywordTrie::kRoot});

  std::vector<DecodeResult> out;
  std::vector<TokenId> all_tokens;
  if (!config.use_trie) {
    for (TokenId t = kEosId; t < V; ++t) all_tokens.push_back(t);
  }

  std::vector<Candidate> candidates;
  std::vector<std::shared_ptr<const DecoderState>> next_states;
  while (!beam.empty() && out.size() < B && st.steps < max_steps) {
    candidates.clear();
    next_states.assign(beam.size(), nullptr);
    std::size_t step_evals = 0;

    for (std::size_t h = 0; h < beam.size(); ++h) {
      const Hypothesis& hyp = beam[h];
      std::vector<TokenId> suffixes;
      std::span<const TokenId> allowed;
      if (config.use_trie) {
        suffixes = trie->suffixes(hyp.node);
        allowed = suffixes;
      } else {
        // EOS may not end an empty hypothesis.
        allowed = std::span<const TokenId>(all_tokens);
        if (hyp.path.empty()) allowed = allowed.subspan(1);
        // The last step may only finish hypotheses.
        else if (st.steps + 1 == max_steps) allowed = allowed.first(1);
      }
      if (allowed.empty()) continue;

      StepOutput step = advance(params, hyp.last, *hyp.state, enc);
      ++st.expansions;
      next_states[h] = std::make_shared<const DecoderState>(std::move(step.state));

      std::vector<double> log_probs;
      if (mode == ScoreMode::kSelfNorm && config.use_trie) {
        // Only the numerators of the allowed tokens are needed.
        log_probs.reserve(allowed.size());
        for (TokenId w : allowed)
          log_probs.push_back(
              self_norm_log_prob(score_token(params, step.features, w)));
        step_evals += allowed.size();
      } else {
        const Vector scores = score_all(params, step.features);
        step_evals += V;
        log_probs = restricted_log_probs(scores, allowed, mode);
      }

      for (std::size_t k = 0; k < allowed.size(); ++k) {
        const TokenId w = allowed[k];
        const double score = hyp.score + log_probs[k];
        if (config.use_drop_otf && !(score > s_min)) continue;
        if (config.use_trie && w == kEosId) {
          out.push_back({hyp.path, score, 0});
        } else {
          candidates.push_back({h, w, score});
        }
      }
    }
    ++st.steps;
    st.score_evaluations += step_evals;
    st.evaluations_per_step.push_back(step_evals);

    // Trie mode shrinks the live beam as results arrive. Without the trie
    // the beam keeps its full width; EOS candidates ranked within the top B
    // finish and the next B non-EOS candidates stay live.
    const std::size_t window = config.use_trie ? (out.size() >= B ? 0 : B - out.size())
                                               : 2 * B;
    const std::size_t keep = std::min(window, candidates.size());
    CandidateOrder order(beam);
    if (keep < candidates.size()) {
      std::nth_element(candidates.begin(),
                       candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                       candidates.end(), order);
      candidates.resize(keep);
    }
    std::sort(candidates.begin(), candidates.end(), order);

    std::vector<Hypothesis> next;
    next.reserve(std::min(B, candidates.size()));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const Candidate& c = candidates[i];
      const Hypothesis& parent = beam[c.parent];
      if (c.token == kEosId) {
        if (i < B && out.size() < B) out.push_back({parent.path, c.score, 0});
        continue;
      }
      if (next.size() >= B) continue;
      Hypothesis child;
      child.path.reserve(parent.path.size() + 1);
      child.path = parent.path;
      child.path.push_back(c.token);
      child.score = c.score;
      child.state = next_states[c.parent];
      child.last = c.token;
      if (config.use_trie) child.node = *trie->child(parent.node, c.token);
      next.push_back(std::move(child));
    }
    beam = std::move(next);
  }

  if (!config.use_drop_otf) {
    std::erase_if(out, [&](const DecodeResult& r) { return !(r.score > s_min); });
  }
  std::sort(out.begin(), out.end(),
            [](const DecodeResult& a, const DecodeResult& b) {
              if (a.score != b.score) return a.score > b.score;
              return path_less(a.keyword, b.keyword);
            });
  if (out.size() > B) out.resize(B);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

double validity_fraction(std::span<const DecodeResult> results,
                         const KeywordTrie& trie) {
  if (results.empty()) return 1.0;
  std::size_t valid = 0;
  for (const auto& r : results)
    if (trie.contains(r.keyword)) ++valid;
  return static_cast<double>(valid) / static_cast<double>(results.size());
}

std::string results_to_json(std::span<const DecodeResult> results,
                            const Vocabulary& vocab, int indent) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results)
    arr.push_back({{"keyword", vocab.render(r.keyword)},
                   {"score", r.score},
                   {"rank", r.rank}});
  return arr.dump(indent);
}

}  // namespace egrm

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

#ifndef EGRM_DECODE_H_
#define EGRM_DECODE_H_

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "egrm/corpus.h"
#include "egrm/model.h"
#include "egrm/trie.h"

namespace egrm {

inline constexpr double kNoThreshold = -std::numeric_limits<double>::infinity();

struct BeamConfig {
  std::size_t beam_size = 10;
  // Log-space output threshold; a result must score strictly above it.
  double score_threshold = kNoThreshold;
  bool use_trie = true;
  bool use_self_norm = true;
  // Discard partial hypotheses at or below the threshold as soon as they
  // are scored, instead of filtering the final output.
  bool use_drop_otf = true;
  // 0 derives the cap from the trie: 2 * max_depth + 2.
  std::size_t max_steps = 0;

  void validate() const;
};

std::size_t default_max_steps(const KeywordTrie& trie);

struct DecodeResult {
  TokenSeq keyword;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

// Work counters for one beam_search call.
struct DecodeStats {
  std::size_t steps = 0;
  std::size_t expansions = 0;         // decoder steps run
  std::size_t score_evaluations = 0;  // output-layer rows computed
  std::vector<std::size_t> evaluations_per_step;
};

// Beam search over `query`. With use_trie every candidate token comes from
// the trie node of its hypothesis, EOS-extensions pass straight to the
// output set, and the live beam keeps the best B - |output| extensions.
// Without a trie all tokens but BOS are candidates, EOS may not come first,
// and the beam keeps a fixed width: EOS-extensions ranked within the top B
// finish, the best B others stay live, and search ends once B have finished.
// On the last permitted step every live hypothesis is forced to end with EOS.
// Results are sorted by score descending, then token order ascending, and
// capped at B. `trie` may be null only when use_trie is false and
// max_steps is set.
std::vector<DecodeResult> beam_search(const Parameters& params,
                                      std::span<const TokenId> query,
                                      const KeywordTrie* trie,
                                      const BeamConfig& config,
                                      DecodeStats* stats = nullptr);

// Share of results that are keywords of `trie`; 1 for an empty list.
double validity_fraction(std::span<const DecodeResult> results,
                         const KeywordTrie& trie);

// [{"keyword": ..., "score": ..., "rank": ...}, ...]
std::string results_to_json(std::span<const DecodeResult> results,
                            const Vocabulary& vocab, int indent = -1);

}  // namespace egrm

#endif  // EGRM_DECODE_H_

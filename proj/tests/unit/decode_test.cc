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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "test_util.h"

namespace egrm {
namespace {

struct Scored {
  TokenSeq keyword;
  double score;
};

// Every keyword of the trie scored by teacher forcing, best first.
std::vector<Scored> brute_force(const Parameters& p, const TokenSeq& query,
                                const KeywordTrie& trie) {
  std::vector<Scored> all;
  for (const auto& k : trie.enumerate()) all.push_back({k, sequence_logprob(p, query, k)});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.keyword < b.keyword;
  });
  return all;
}

std::vector<TokenSeq> random_keywords(Rng& rng, std::size_t n, TokenId vocab,
                                      std::size_t max_len) {
  std::vector<TokenSeq> out;
  for (std::size_t i = 0; i < n; ++i) {
    TokenSeq k(1 + uniform_index(rng, max_len));
    for (auto& t : k)
      t = kNumReserved + static_cast<TokenId>(uniform_index(rng, vocab - kNumReserved));
    out.push_back(std::move(k));
  }
  return out;
}

BeamConfig exact_config(std::size_t beam) {
  BeamConfig c;
  c.beam_size = beam;
  c.use_self_norm = false;
  c.use_drop_otf = false;
  return c;
}

TEST(BeamConfigTest, Validate) {
  BeamConfig c;
  c.beam_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c.beam_size = 1;
  c.score_threshold = std::nan("");
  EXPECT_THROW(c.validate(), Error);
}

TEST(BeamSearchTest, Errors) {
  ShoeFixture f;
  const Parameters p = noisy_params(tiny_config(8), 1);
  EXPECT_THROW(beam_search(p, TokenSeq{}, &f.trie, BeamConfig{}), Error);
  EXPECT_THROW(beam_search(p, TokenSeq{3}, nullptr, BeamConfig{}), Error);
  BeamConfig free;
  free.use_trie = false;
  EXPECT_THROW(beam_search(p, TokenSeq{3}, nullptr, free), Error);
  free.max_steps = 4;
  EXPECT_NO_THROW(beam_search(p, TokenSeq{3}, nullptr, free));
}

TEST(BeamSearchTest, FixtureReturnsAllKeywordsRankedByOracle) {
  ShoeFixture f;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Parameters p = noisy_params(tiny_config(8), seed, 1.0);
    const TokenSeq q = {f.green, f.shoes};
    const auto out = beam_search(p, q, &f.trie, exact_config(10));
    const auto ref = brute_force(p, q, f.trie);
    ASSERT_EQ(out.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(out[i].keyword, ref[i].keyword);
      EXPECT_NEAR(out[i].score, ref[i].score, 1e-9);
      EXPECT_EQ(out[i].rank, i + 1);
    }
  }
}

TEST(BeamSearchTest, GreedyIsAValidKeyword) {
  ShoeFixture f;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Parameters p = noisy_params(tiny_config(8), seed, 1.0);
    for (bool sn : {false, true}) {
      BeamConfig c;
      c.beam_size = 1;
      c.use_self_norm = sn;
      const auto out = beam_search(p, TokenSeq{f.red}, &f.trie, c);
      ASSERT_EQ(out.size(), 1u);
      EXPECT_TRUE(f.trie.contains(out[0].keyword));
    }
  }
}

TEST(BeamSearchTest, ZeroThresholdEmptiesOutput) {
  ShoeFixture f;
  const Parameters p = noisy_params(tiny_config(8), 3, 1.0);
  for (bool sn : {false, true}) {
    BeamConfig c;
    c.beam_size = 10;
    c.score_threshold = 0.0;
    c.use_self_norm = sn;
    EXPECT_TRUE(beam_search(p, TokenSeq{f.red}, &f.trie, c).empty());
  }
}

TEST(BeamSearchTest, PruningWorkBound) {
  ShoeFixture f;
  const Parameters p = noisy_params(tiny_config(8), 5, 1.0);
  BeamConfig c;
  c.beam_size = 10;
  c.use_self_norm = true;
  c.use_drop_otf = false;
  DecodeStats st;
  beam_search(p, TokenSeq{f.blue}, &f.trie, c, &st);
  // Root: {red, blue}; depth 1: red -> {shoes, shirt}, blue -> {shoes};
  // depth 2: EOS for each of the three keywords.
  EXPECT_EQ(st.evaluations_per_step, (std::vector<std::size_t>{2, 3, 3}));
  EXPECT_EQ(st.score_evaluations, 8u);

  // Exact softmax needs the full vocabulary at every expansion.
  c.use_self_norm = false;
  beam_search(p, TokenSeq{f.blue}, &f.trie, c, &st);
  EXPECT_EQ(st.score_evaluations, st.expansions * 8);
}

TEST(BeamSearchTest, ClosedSetOnRandomModels) {
  Rng rng(99);
  std::size_t sessions = 0;
  for (int round = 0; round < 60; ++round) {
    const TokenId V = 12 + TokenId(uniform_index(rng, 10));
    const auto kw = random_keywords(rng, 1 + uniform_index(rng, 40), V, 5);
    const auto trie = KeywordTrie::build(kw);
    const auto cell = uniform_index(rng, 2) ? CellType::kLstm : CellType::kGru;
    const Parameters p = noisy_params(tiny_config(V, cell), rng(), 1.0);
    for (int q = 0; q < 3; ++q) {
      TokenSeq query(1 + uniform_index(rng, 4));
      for (auto& t : query) t = kNumReserved + TokenId(uniform_index(rng, V - kNumReserved));
      BeamConfig c;
      c.beam_size = 1 + uniform_index(rng, 30);
      c.use_self_norm = uniform_index(rng, 2);
      c.use_drop_otf = uniform_index(rng, 2);
      c.score_threshold = uniform_index(rng, 2) ? kNoThreshold : -3.0 - 5.0 * uniform01(rng);
      const auto out = beam_search(p, query, &trie, c);
      ++sessions;
      EXPECT_LE(out.size(), c.beam_size);
      for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_TRUE(trie.contains(out[i].keyword));
        EXPECT_LE(out[i].score, 0.0);
        EXPECT_GT(out[i].score, c.score_threshold);
        EXPECT_EQ(out[i].rank, i + 1);
        if (i > 0) EXPECT_GE(out[i - 1].score, out[i].score);
      }
      EXPECT_DOUBLE_EQ(validity_fraction(out, trie), 1.0);
    }
  }
  EXPECT_EQ(sessions, 180u);
}

TEST(BeamSearchTest, ExactnessOracle) {
  Rng rng(1234);
  for (int round = 0; round < 25; ++round) {
    const TokenId V = 10 + TokenId(uniform_index(rng, 8));
    const auto trie = KeywordTrie::build(random_keywords(rng, 5 + uniform_index(rng, 60), V, 4));
    const auto att = uniform_index(rng, 2) ? AttentionKind::kDot : AttentionKind::kAdditive;
    const Parameters p = noisy_params(tiny_config(V, CellType::kGru, att), rng(), 1.0);
    const TokenSeq query = {4, 5, 6};
    const auto ref = brute_force(p, query, trie);
    const auto out = beam_search(p, query, &trie, exact_config(trie.keyword_count()));
    ASSERT_EQ(out.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(out[i].keyword, ref[i].keyword);
      EXPECT_NEAR(out[i].score, ref[i].score, 1e-9);
    }
  }
}

TEST(BeamSearchTest, DropOtfSoundness) {
  Rng rng(4321);
  for (int round = 0; round < 25; ++round) {
    const TokenId V = 10 + TokenId(uniform_index(rng, 8));
    const auto trie = KeywordTrie::build(random_keywords(rng, 5 + uniform_index(rng, 60), V, 4));
    const Parameters p = noisy_params(tiny_config(V, CellType::kLstm), rng(), 1.0);
    const TokenSeq query = {3, 7};
    const auto ref = brute_force(p, query, trie);
    // Threshold at a median score so both sides are populated.
    const double s_min = ref[ref.size() / 2].score;
    BeamConfig c = exact_config(trie.keyword_count());
    c.use_drop_otf = true;
    c.score_threshold = s_min;
    const auto out = beam_search(p, query, &trie, c);
    std::set<TokenSeq> expected, got;
    for (const auto& r : ref)
      if (r.score > s_min) expected.insert(r.keyword);
    for (const auto& r : out) got.insert(r.keyword);
    EXPECT_EQ(got, expected);

    // The late filter keeps the same set.
    c.use_drop_otf = false;
    std::set<TokenSeq> late;
    for (const auto& r : beam_search(p, query, &trie, c)) late.insert(r.keyword);
    EXPECT_EQ(late, expected);
  }
}

TEST(BeamSearchTest, DropOtfNeverEvaluatesMore) {
  Rng rng(8);
  const auto trie = KeywordTrie::build(random_keywords(rng, 200, 20, 5));
  const Parameters p = noisy_params(tiny_config(20), 2, 1.0);
  BeamConfig c;
  c.beam_size = 40;
  c.score_threshold = -6.0;
  DecodeStats with, without;
  beam_search(p, TokenSeq{4, 9}, &trie, c, &with);
  c.use_drop_otf = false;
  beam_search(p, TokenSeq{4, 9}, &trie, c, &without);
  EXPECT_LE(with.score_evaluations, without.score_evaluations);
}

TEST(BeamSearchTest, SelfNormScoresAreClampedSums) {
  ShoeFixture f;
  const Parameters p = noisy_params(tiny_config(8), 6, 2.0);
  BeamConfig c;
  c.beam_size = 10;
  c.use_drop_otf = false;
  const TokenSeq q = {f.red};
  for (const auto& r : beam_search(p, q, &f.trie, c)) {
    const auto enc = encode(p, q);
    DecoderState st = initial_state(p, enc);
    TokenId prev = kBosId;
    double expect = 0.0;
    TokenSeq full = r.keyword;
    full.push_back(kEosId);
    for (TokenId t : full) {
      const auto step = decode_step(p, prev, st, enc);
      expect += self_norm_log_prob(step.scores[t]);
      st = step.state;
      prev = t;
    }
    EXPECT_NEAR(r.score, expect, 1e-12);
  }
}

TEST(BeamSearchTest, NoTrieTerminatesAndMayLeaveTheSet) {
  ShoeFixture f;
  std::size_t invalid = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Parameters p = noisy_params(tiny_config(8), seed, 1.0);
    BeamConfig c;
    c.beam_size = 10;
    c.use_trie = false;
    c.use_self_norm = false;
    c.use_drop_otf = false;
    DecodeStats st;
    const auto out = beam_search(p, TokenSeq{f.red}, &f.trie, c, &st);
    EXPECT_LE(st.steps, default_max_steps(f.trie));
    for (const auto& r : out) {
      EXPECT_FALSE(r.keyword.empty());
      for (TokenId t : r.keyword) EXPECT_NE(t, kBosId);
      invalid += !f.trie.contains(r.keyword);
    }
  }
  EXPECT_GT(invalid, 0u);
}

TEST(BeamSearchTest, TiesBreakByTokenOrder) {
  // Zero weights: every continuation has the same score, so ranking falls
  // back to token order.
  ShoeFixture f;
  Parameters p(tiny_config(8));
  p.set_zero();
  const auto out = beam_search(p, TokenSeq{f.red}, &f.trie, exact_config(10));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].keyword, (TokenSeq{f.red, f.shoes}));
  EXPECT_EQ(out[1].keyword, (TokenSeq{f.red, f.shirt}));
  EXPECT_EQ(out[2].keyword, (TokenSeq{f.blue, f.shoes}));
}

TEST(ValidityTest, Fractions) {
  ShoeFixture f;
  EXPECT_DOUBLE_EQ(validity_fraction({}, f.trie), 1.0);
  std::vector<DecodeResult> r(8);
  for (auto& x : r) x.keyword = {f.green};
  r[0].keyword = {f.red, f.shoes};
  r[5].keyword = {f.blue, f.shoes};
  EXPECT_DOUBLE_EQ(validity_fraction(r, f.trie), 0.25);
}

TEST(ResultsJsonTest, Format) {
  ShoeFixture f;
  const std::vector<DecodeResult> r = {{{f.red, f.shoes}, -0.5, 1}};
  const auto j = nlohmann::json::parse(results_to_json(r, f.vocab));
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j[0]["keyword"], "red shoes");
  EXPECT_EQ(j[0]["score"], -0.5);
  EXPECT_EQ(j[0]["rank"], 1);
}

}  // namespace
}  // namespace egrm

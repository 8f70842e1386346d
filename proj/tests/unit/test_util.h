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

// Shared helpers for the unit tests.

#ifndef EGRM_TESTS_UNIT_TEST_UTIL_H_
#define EGRM_TESTS_UNIT_TEST_UTIL_H_

#include <filesystem>
#include <random>
#include <string>

#include "egrm/corpus.h"
#include "egrm/model.h"
#include "egrm/trie.h"

namespace egrm {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("egrm_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// red=3 shoes=4 shirt=5 blue=6 green=7
struct ShoeFixture {
  Vocabulary vocab{std::vector<std::string>{"red", "shoes", "shirt", "blue", "green"}};
  TokenId red = 3, shoes = 4, shirt = 5, blue = 6, green = 7;
  std::vector<TokenSeq> keywords{{3, 4}, {3, 5}, {6, 4}};
  KeywordTrie trie = KeywordTrie::build(keywords);
};

inline ModelConfig tiny_config(std::uint32_t vocab, CellType cell = CellType::kGru,
                               AttentionKind att = AttentionKind::kAdditive,
                               std::uint32_t layers = 1) {
  ModelConfig c;
  c.cell = cell;
  c.attention = att;
  c.encoder_layers = layers;
  c.decoder_layers = layers;
  c.embed_dim = 6;
  c.hidden_dim = 8;
  c.vocab_size = vocab;
  return c;
}

// Initialized weights plus uniform noise on everything, biases included, so
// no tensor sits at an exactly symmetric point.
inline Parameters noisy_params(const ModelConfig& c, std::uint64_t seed,
                               double scale = 0.5) {
  Parameters p = init_params(c, seed);
  Rng rng(seed * 31 + 1);
  for (double& v : p.values()) v += (uniform01(rng) - 0.5) * scale;
  return p;
}

}  // namespace egrm

#endif  // EGRM_TESTS_UNIT_TEST_UTIL_H_

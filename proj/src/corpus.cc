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

#include "egrm/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace egrm {

namespace {

bool is_unicode_space(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

// Simple case folding for the alphabets where it is a fixed offset.
char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if (c < 0x80) return c;
  if ((c >= 0xC0 && c <= 0xDE && c != 0xD7)) return c + 0x20;
  if (c >= 0x100 && c <= 0x137 && c % 2 == 0) return c + 1;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

// Decodes one code point starting at text[i]; returns its byte length, or 0
// for an invalid sequence.
std::size_t decode_utf8(std::string_view text, std::size_t i, char32_t* out) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t len;
  char32_t cp;
  if (b0 < 0x80) {
    *out = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > text.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  *out = cp;
  return len;
}

void append_utf8(std::string& out, char32_t cp) {
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

bool is_reserved_spelling(std::string_view token) {
  return token == Vocabulary::kBosToken || token == Vocabulary::kEosToken ||
         token == Vocabulary::kUnkToken;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp;
    std::size_t len = decode_utf8(text, i, &cp);
    if (len == 0) {
      current.push_back(text[i]);
      ++i;
      continue;
    }
    i += len;
    if (is_unicode_space(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      append_utf8(current, to_lower(cp));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  return join_tokens(tokenize(text));
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  id_to_token_ = {kBosToken, kEosToken, kUnkToken};
  id_to_token_.reserve(tokens.size() + kNumReserved);
  for (TokenId id = 0; id < kNumReserved; ++id)
    token_to_id_.emplace(id_to_token_[id], id);
  for (auto& t : tokens) {
    if (t.empty() || is_reserved_spelling(t))
      throw Error("vocabulary token '" + t + "' is empty or reserved");
    const auto id = static_cast<TokenId>(id_to_token_.size());
    if (!token_to_id_.emplace(t, id).second)
      throw Error("duplicate vocabulary token '" + t + "'");
    id_to_token_.push_back(std::move(t));
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(token);
  if (it == token_to_id_.end() || it->second < kNumReserved) return kUnkId;
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= id_to_token_.size()) return id_to_token_[kUnkId];
  return id_to_token_[id];
}

bool Vocabulary::contains(std::string_view token) const {
  return id(token) != kUnkId;
}

TokenSeq Vocabulary::encode(std::span<const std::string> tokens) const {
  TokenSeq ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(
    std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(token(id));
  return out;
}

TokenSeq Vocabulary::encode_text(std::string_view text) const {
  auto toks = tokenize(text);
  return encode(toks);
}

std::string Vocabulary::render(std::span<const TokenId> ids) const {
  auto toks = decode(ids);
  return join_tokens(toks);
}

void Vocabulary::save(const std::string& path) const {
  auto out = open_output(path);
  for (const auto& t : id_to_token_) out << t << '\n';
  if (!out) throw Error("failed writing " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < kNumReserved || lines[0] != kBosToken ||
      lines[1] != kEosToken || lines[2] != kUnkToken)
    throw Error(path + ": vocabulary must start with <s>, <e>, <unk>");
  return Vocabulary(
      std::vector<std::string>(lines.begin() + kNumReserved, lines.end()));
}

TokenSeq encode_tokens(const Vocabulary& vocab,
                       std::span<const std::string> tokens) {
  return vocab.encode(tokens);
}

Vocabulary build_vocab(std::span<const RawPair> corpus, std::size_t max_size) {
  if (corpus.empty()) throw Error("build_vocab: corpus has no data");
  if (max_size < kNumReserved)
    throw Error("build_vocab: max_size must be at least 3");
  std::map<std::string, std::uint64_t> freq;
  for (const auto& pair : corpus) {
    for (auto& t : tokenize(pair.source))
      if (!is_reserved_spelling(t)) ++freq[std::move(t)];
    for (auto& t : tokenize(pair.target))
      if (!is_reserved_spelling(t)) ++freq[std::move(t)];
  }
  if (freq.empty()) throw Error("build_vocab: corpus has no data");
  std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(),
                                                            freq.end());
  // freq is already sorted by token, so a stable sort on count keeps the
  // lexicographic tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kNumReserved);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocabulary(std::move(tokens));
}

std::vector<ParallelPair> encode_corpus(const Vocabulary& vocab,
                                        std::span<const RawPair> corpus) {
  std::vector<ParallelPair> out;
  out.reserve(corpus.size());
  for (const auto& raw : corpus) {
    ParallelPair p{vocab.encode_text(raw.source), vocab.encode_text(raw.target)};
    if (p.source.empty() || p.target.empty()) continue;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<RawPair> read_corpus(const std::string& path,
                                 const TitleFilter& filter) {
  auto in = open_input(path);
  std::vector<RawPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw Error(path + ":" + std::to_string(lineno) +
                  ": expected exactly one TAB separating source and target");
    RawPair p{line.substr(0, tab), line.substr(tab + 1)};
    if (filter) p.target = filter(p.target);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_corpus(const std::string& path, std::span<const RawPair> corpus) {
  auto out = open_output(path);
  for (const auto& p : corpus) out << p.source << '\t' << p.target << '\n';
  if (!out) throw Error("failed writing " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, std::span<const std::string> lines) {
  auto out = open_output(path);
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw Error("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Synthetic generator
//
// Keywords follow slot forms over brand (B), attribute (A), object (O) and
// tail (T) words. Queries reorder the same slots and sprinkle in modifier
// words; titles are either the keyword itself or a slot phrase carrying a
// filler word that never occurs in a keyword.

namespace {

enum Slot : std::uint8_t { kBrand, kAttr, kAttr2, kObject, kTail, kTail2 };

const std::vector<std::vector<Slot>>& keyword_forms() {
  static const std::vector<std::vector<Slot>> forms = {
      {kBrand, kObject},
      {kBrand, kAttr, kObject},
      {kBrand, kAttr, kObject, kTail},
      {kAttr, kObject},
      {kAttr, kObject, kTail},
      {kBrand, kObject, kTail},
      {kBrand, kAttr, kAttr2, kObject},
      {kBrand, kAttr, kObject, kTail, kTail2},
  };
  return forms;
}

// Query templates. 'M' is a modifier word, the rest name slots; '*' suffixed
// slots expand to all words of that kind present in the concept.
const std::vector<std::string>& query_templates() {
  static const std::vector<std::string> templates = {
      "M A* O B T*", "B O A* M",     "O B A* T*", "M M B A* O T*",
      "A* O M B T*", "O M B A*",     "B A* O T*", "T* M O A* B",
  };
  return templates;
}

const std::vector<std::string> kTails = {
    "online", "price",  "sale", "kit",   "set",     "pro",
    "mini",   "plus",   "max",  "lite",  "deluxe",  "classic",
    "repair", "rental", "parts", "used"};
const std::vector<std::string> kModifiers = {
    "buy",  "cheap", "best",   "where",   "to",       "for",
    "near", "me",    "how",    "much",    "is",       "the",
    "a",    "new",   "top",    "good",    "review",   "compare",
    "vs",   "order", "find",   "quality", "discount", "nearby"};
const std::vector<std::string> kFillers = {
    "official", "website", "free",    "shipping", "deals",   "outlet",
    "catalog",  "genuine", "authentic", "warehouse", "express", "delivery",
    "page",     "home",    "listing", "promo",    "hot",     "exclusive",
    "bargain",  "limited", "store",   "shop",     "brand",   "center"};

struct WordPools {
  std::vector<std::string> brands, attrs, objects;
};

// Pseudo-words from a fixed stream so the vocabulary does not depend on the
// data seed.
const WordPools& word_pools() {
  static const WordPools pools = [] {
    const std::string cons = "bdfgklmnprstvz";
    const std::string vows = "aeiou";
    std::set<std::string> used(kTails.begin(), kTails.end());
    used.insert(kModifiers.begin(), kModifiers.end());
    used.insert(kFillers.begin(), kFillers.end());
    Rng rng(0x5eedc0ffeeULL);
    auto make = [&](std::size_t n, std::size_t syllables) {
      std::vector<std::string> out;
      while (out.size() < n) {
        std::string w;
        for (std::size_t s = 0; s < syllables; ++s) {
          w.push_back(cons[uniform_index(rng, cons.size())]);
          w.push_back(vows[uniform_index(rng, vows.size())]);
        }
        if (used.insert(w).second) out.push_back(w);
      }
      return out;
    };
    WordPools p;
    p.brands = make(180, 3);
    p.attrs = make(85, 2);
    p.objects = make(180, 2);
    return p;
  }();
  return pools;
}

struct Concept {
  std::size_t form = 0;
  std::size_t brand = 0, attr = 0, attr2 = 0, object = 0, tail = 0, tail2 = 0;
};

Concept random_concept(Rng& rng) {
  const auto& pools = word_pools();
  Concept c;
  c.form = uniform_index(rng, keyword_forms().size());
  c.brand = uniform_index(rng, pools.brands.size());
  c.attr = uniform_index(rng, pools.attrs.size());
  do {
    c.attr2 = uniform_index(rng, pools.attrs.size());
  } while (c.attr2 == c.attr);
  c.object = uniform_index(rng, pools.objects.size());
  c.tail = uniform_index(rng, kTails.size());
  do {
    c.tail2 = uniform_index(rng, kTails.size());
  } while (c.tail2 == c.tail);
  return c;
}

bool has_slot(const Concept& c, Slot s) {
  const auto& f = keyword_forms()[c.form];
  return std::find(f.begin(), f.end(), s) != f.end();
}

const std::string& slot_word(const Concept& c, Slot s) {
  const auto& pools = word_pools();
  switch (s) {
    case kBrand: return pools.brands[c.brand];
    case kAttr: return pools.attrs[c.attr];
    case kAttr2: return pools.attrs[c.attr2];
    case kObject: return pools.objects[c.object];
    case kTail: return kTails[c.tail];
    case kTail2: return kTails[c.tail2];
  }
  return pools.objects[c.object];
}

std::string keyword_text(const Concept& c) {
  std::vector<std::string> words;
  for (Slot s : keyword_forms()[c.form]) words.push_back(slot_word(c, s));
  return join_tokens(words);
}

std::string query_text(const Concept& c, std::size_t template_index,
                       Rng& rng) {
  std::istringstream tpl(query_templates()[template_index]);
  std::vector<std::string> words;
  std::string item;
  while (tpl >> item) {
    if (item == "M") {
      words.push_back(kModifiers[uniform_index(rng, kModifiers.size())]);
    } else if (item == "B") {
      if (has_slot(c, kBrand)) words.push_back(slot_word(c, kBrand));
    } else if (item == "O") {
      words.push_back(slot_word(c, kObject));
    } else if (item == "A*") {
      for (Slot s : {kAttr, kAttr2})
        if (has_slot(c, s)) words.push_back(slot_word(c, s));
    } else if (item == "T*") {
      for (Slot s : {kTail, kTail2})
        if (has_slot(c, s)) words.push_back(slot_word(c, s));
    }
  }
  return join_tokens(words);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

// Slot phrase plus one or two filler words; never a keyword. A concept always
// gets the same title.
std::string filler_title(const Concept& c) {
  std::uint64_t h = c.form;
  for (std::size_t v : {c.brand, c.attr, c.attr2, c.object, c.tail, c.tail2})
    h = h * 1000003ULL + v;
  Rng rng(stream_seed(h, 3));
  std::vector<std::string> core;
  for (Slot s : keyword_forms()[c.form]) core.push_back(slot_word(c, s));
  const auto& f1 = kFillers[uniform_index(rng, kFillers.size())];
  const auto& f2 = kFillers[uniform_index(rng, kFillers.size())];
  std::vector<std::string> words;
  switch (uniform_index(rng, 3)) {
    case 0:
      words = core;
      words.push_back(f1);
      break;
    case 1:
      words.push_back(f1);
      words.insert(words.end(), core.begin(), core.end());
      break;
    default:
      words = core;
      words.push_back(f1);
      words.push_back(f2);
      break;
  }
  return join_tokens(words);
}

void validate(const SyntheticSpec& spec) {
  if (spec.keyword_count == 0)
    throw Error("synthetic: keyword_count must be positive (closed set is empty)");
  if (!(spec.overlap_fraction >= 0.0 && spec.overlap_fraction <= 1.0))
    throw Error("synthetic: overlap_fraction must lie in [0, 1]");
  if (spec.template_count == 0 ||
      spec.template_count > query_templates().size())
    throw Error("synthetic: template_count must be in [1, " +
                std::to_string(query_templates().size()) + "]");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct KeywordPlan {
  std::vector<Concept> concepts;
  std::vector<std::string> keywords;
  std::vector<std::size_t> reachable;  // indices into keywords
};

KeywordPlan plan_keywords(const SyntheticSpec& spec) {
  Rng rng(stream_seed(spec.seed, 0));
  KeywordPlan plan;
  std::set<std::string> seen;
  const std::size_t max_attempts = spec.keyword_count * 50 + 1000;
  for (std::size_t attempt = 0;
       plan.keywords.size() < spec.keyword_count && attempt < max_attempts;
       ++attempt) {
    Concept c = random_concept(rng);
    std::string text = keyword_text(c);
    if (!seen.insert(text).second) continue;
    plan.concepts.push_back(c);
    plan.keywords.push_back(std::move(text));
  }
  if (plan.keywords.size() < spec.keyword_count)
    throw Error("synthetic: keyword grammar cannot produce " +
                std::to_string(spec.keyword_count) + " distinct keywords");
  std::vector<std::size_t> order(plan.keywords.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_in_place(order, rng);
  const auto n_reach = static_cast<std::size_t>(
      std::llround(spec.overlap_fraction * static_cast<double>(order.size())));
  plan.reachable.assign(order.begin(), order.begin() + n_reach);
  return plan;
}

}  // namespace

std::size_t synthetic_template_limit() { return query_templates().size(); }

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  KeywordPlan plan = plan_keywords(spec);
  if (spec.num_pairs < plan.reachable.size())
    throw Error("synthetic: num_pairs (" + std::to_string(spec.num_pairs) +
                ") is smaller than the number of title-reachable keywords (" +
                std::to_string(plan.reachable.size()) + ")");

  Rng rng(stream_seed(spec.seed, 1));
  SyntheticData data;
  data.corpus.reserve(spec.num_pairs);
  for (std::size_t i = 0; i < spec.num_pairs; ++i) {
    const std::size_t tpl = uniform_index(rng, spec.template_count);
    if (i < plan.reachable.size() ||
        (!plan.reachable.empty() && uniform01(rng) < 0.6)) {
      const std::size_t k =
          i < plan.reachable.size()
              ? plan.reachable[i]
              : plan.reachable[uniform_index(rng, plan.reachable.size())];
      const Concept& c = plan.concepts[k];
      data.corpus.push_back({query_text(c, tpl, rng), plan.keywords[k]});
    } else {
      Concept c = random_concept(rng);
      std::string query = query_text(c, tpl, rng);
      data.corpus.push_back({std::move(query), filler_title(c)});
    }
  }
  shuffle_in_place(data.corpus, rng);
  data.keywords = std::move(plan.keywords);
  return data;
}

std::vector<std::string> synthetic_queries(const SyntheticSpec& spec,
                                           std::size_t count,
                                           std::uint64_t salt) {
  validate(spec);
  KeywordPlan plan = plan_keywords(spec);
  std::vector<std::size_t> pool = plan.reachable;
  if (pool.empty()) {
    pool.resize(plan.keywords.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  }
  Rng rng(stream_seed(spec.seed, 100 + salt));
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t attempt = 0; out.size() < count && attempt < count * 50;
       ++attempt) {
    const Concept& c = plan.concepts[pool[uniform_index(rng, pool.size())]];
    std::string q =
        query_text(c, uniform_index(rng, spec.template_count), rng);
    if (seen.insert(q).second) out.push_back(std::move(q));
  }
  return out;
}

std::vector<std::string> zipf_workload(std::span<const std::string> queries,
                                       std::size_t draws, double exponent,
                                       std::uint64_t seed) {
  if (queries.empty()) return {};
  std::vector<double> cdf(queries.size());
  double total = 0.0;
  for (std::size_t r = 0; r < queries.size(); ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
    cdf[r] = total;
  }
  Rng rng(stream_seed(seed, 7));
  std::vector<std::string> out;
  out.reserve(draws);
  for (std::size_t i = 0; i < draws; ++i) {
    const double u = uniform01(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    out.push_back(queries[static_cast<std::size_t>(it - cdf.begin())]);
  }
  return out;
}

}  // namespace egrm

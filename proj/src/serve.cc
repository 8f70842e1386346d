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

#include "egrm/serve.h"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <json.hpp>

namespace egrm {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Frequency table

std::vector<std::string> FrequencyTable::frequent(std::uint64_t threshold) const {
  std::vector<std::pair<std::string, std::uint64_t>> picked;
  for (const auto& [q, n] : counts)
    if (n >= threshold) picked.emplace_back(q, n);
  std::stable_sort(picked.begin(), picked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(picked.size());
  for (auto& [q, _] : picked) out.push_back(std::move(q));
  return out;
}

std::uint64_t FrequencyTable::threshold_for_top_fraction(double fraction) const {
  if (counts.empty()) return 1;
  std::vector<std::uint64_t> values;
  values.reserve(counts.size());
  for (const auto& [_, n] : counts) values.push_back(n);
  std::sort(values.begin(), values.end(), std::greater<>());
  const double clamped = std::clamp(fraction, 0.0, 1.0);
  auto want = static_cast<std::size_t>(
      std::ceil(clamped * static_cast<double>(values.size())));
  want = std::clamp<std::size_t>(want, 1, values.size());
  return values[want - 1];
}

double FrequencyTable::volume_share(std::uint64_t threshold) const {
  if (total == 0) return 0.0;
  std::uint64_t head = 0;
  for (const auto& [_, n] : counts)
    if (n >= threshold) head += n;
  return static_cast<double>(head) / static_cast<double>(total);
}

FrequencyTable build_frequency_table(std::span<const std::string> query_log) {
  FrequencyTable table;
  for (const auto& q : query_log) {
    std::string key = normalize_text(q);
    if (key.empty()) continue;
    ++table.counts[std::move(key)];
    ++table.total;
  }
  return table;
}

void write_frequency_tsv(const std::string& path, const FrequencyTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (const auto& q : table.frequent(1)) out << q << '\t' << table.counts.at(q) << '\n';
  if (!out) throw Error("failed writing " + path);
}

FrequencyTable read_frequency_tsv(const std::string& path) {
  FrequencyTable table;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw Error(path + ": line " + std::to_string(lineno) + " lacks a TAB");
    std::uint64_t n = 0;
    try {
      std::size_t used = 0;
      n = std::stoull(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(path + ": line " + std::to_string(lineno) + " has a bad count");
    }
    if (n == 0) continue;
    table.counts[normalize_text(line.substr(0, tab))] += n;
    table.total += n;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Store

std::vector<KeywordHit> render_hits(std::span<const DecodeResult> results,
                                    const Vocabulary& vocab) {
  std::vector<KeywordHit> hits;
  hits.reserve(results.size());
  for (const auto& r : results)
    hits.push_back({vocab.render(r.keyword), r.score, r.rank});
  return hits;
}

const std::vector<KeywordHit>* PrecomputedStore::find(
    std::string_view normalized) const {
  auto it = entries.find(std::string(normalized));
  return it == entries.end() ? nullptr : &it->second;
}

void write_store_jsonl(const std::string& path, const PrecomputedStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (const auto& [query, hits] : store.entries) {
    ordered_json line;
    line["query"] = query;
    line["results"] = ordered_json::array();
    for (const auto& h : hits)
      line["results"].push_back(
          {{"keyword", h.keyword}, {"score", h.score}, {"rank", h.rank}});
    line["model_tag"] = store.model_tag;
    out << line.dump() << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

PrecomputedStore read_store_jsonl(const std::string& path) {
  PrecomputedStore store;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    try {
      const auto j = nlohmann::json::parse(line);
      std::vector<KeywordHit> hits;
      for (const auto& r : j.at("results"))
        hits.push_back({r.at("keyword").get<std::string>(),
                        r.at("score").get<double>(),
                        r.value("rank", hits.size() + 1)});
      const std::string tag = j.at("model_tag").get<std::string>();
      if (lineno == 1) {
        store.model_tag = tag;
      } else if (tag != store.model_tag) {
        throw Error("mixed model tags");
      }
      store.entries[normalize_text(j.at("query").get<std::string>())] =
          std::move(hits);
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return store;
}

PrecomputedStore precompute(std::span<const std::string> queries,
                            const Parameters& offline_params,
                            const Vocabulary& vocab, const KeywordTrie& trie,
                            const BeamConfig& beam, PrecomputeReport* report) {
  PrecomputedStore store;
  store.model_tag = params_tag(offline_params);
  for (const auto& raw : queries) {
    const std::string key = normalize_text(raw);
    if (store.entries.count(key)) continue;
    try {
      const TokenSeq ids = vocab.encode_text(key);
      const auto results = beam_search(offline_params, ids, &trie, beam);
      store.entries[key] = render_hits(results, vocab);
    } catch (const Error& e) {
      store.entries[key] = {};
      if (report) report->skipped.emplace_back(key, e.what());
    }
  }
  return store;
}

// ---------------------------------------------------------------------------
// Routing

void RouterConfig::validate() const {
  if (frequency_threshold < 1)
    throw Error("router config: frequency_threshold must be at least 1");
  online_beam.validate();
  offline_beam.validate();
}

const char* to_string(ResultSource source) {
  return source == ResultSource::kOfflineCache ? "offline-cache"
                                               : "online-decode";
}

ServeResponse serve_request(std::string_view query,
                            const PrecomputedStore& store,
                            const Parameters& online_params,
                            const Vocabulary& vocab, const KeywordTrie& trie,
                            const RouterConfig& config) {
  ServeResponse resp;
  resp.query = std::string(query);
  const std::string key = normalize_text(query);
  if (const auto* hits = store.find(key)) {
    resp.results = *hits;
    resp.source = ResultSource::kOfflineCache;
    return resp;
  }
  resp.source = ResultSource::kOnlineDecode;
  const TokenSeq ids = vocab.encode_text(key);
  if (ids.empty()) return resp;
  const auto results = beam_search(online_params, ids, &trie, config.online_beam);
  resp.results = render_hits(results, vocab);
  return resp;
}

Router::Router(PrecomputedStore store, const Parameters& online_params,
               const Vocabulary& vocab, const KeywordTrie& trie,
               RouterConfig config)
    : store_(std::move(store)),
      params_(online_params),
      vocab_(vocab),
      trie_(trie),
      config_(std::move(config)) {
  config_.validate();
}

ServeResponse Router::serve(std::string_view query) {
  const auto start = std::chrono::steady_clock::now();
  ServeResponse resp =
      serve_request(query, store_, params_, vocab_, trie_, config_);
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  std::lock_guard lock(mu_);
  ++counters_.requests;
  if (resp.source == ResultSource::kOfflineCache) {
    ++counters_.hits;
    counters_.offline_ms += ms;
  } else {
    ++counters_.misses;
    counters_.online_ms += ms;
  }
  return resp;
}

std::string hits_to_json(std::span<const KeywordHit> hits) {
  ordered_json arr = ordered_json::array();
  for (const auto& h : hits)
    arr.push_back({{"keyword", h.keyword}, {"score", h.score}});
  return arr.dump();
}

std::string response_to_json(const ServeResponse& response) {
  ordered_json j;
  j["query"] = response.query;
  j["results"] = ordered_json::array();
  for (const auto& h : response.results)
    j["results"].push_back({{"keyword", h.keyword}, {"score", h.score}});
  j["source"] = to_string(response.source);
  return j.dump();
}

std::string Router::handle_line(std::string_view line) {
  std::string query;
  try {
    const auto j = nlohmann::json::parse(line);
    if (!j.is_object() || !j.contains("query") || !j["query"].is_string())
      throw Error("request must be an object with a string \"query\"");
    query = j["query"].get<std::string>();
  } catch (const std::exception& e) {
    {
      std::lock_guard lock(mu_);
      ++counters_.errors;
    }
    ordered_json err;
    err["error"] = std::string("malformed request: ") + e.what();
    return err.dump();
  }
  try {
    return response_to_json(serve(query));
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    ++counters_.errors;
    ordered_json err;
    err["error"] = e.what();
    return err.dump();
  }
}

Router::Counters Router::counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

}  // namespace egrm

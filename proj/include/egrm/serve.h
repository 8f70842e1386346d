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

// Online/offline mixed serving: head queries are answered from a store
// computed offline, tail queries are decoded live.

#ifndef EGRM_SERVE_H_
#define EGRM_SERVE_H_

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "egrm/decode.h"

namespace egrm {

// Query counts keyed by normalized query text.
struct FrequencyTable {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;

  // Queries with count >= threshold, most frequent first (ties by text).
  std::vector<std::string> frequent(std::uint64_t threshold) const;
  // Smallest count threshold that selects at least `fraction` of the
  // distinct queries, counting from the most frequent.
  std::uint64_t threshold_for_top_fraction(double fraction) const;
  // Share of total volume carried by queries with count >= threshold.
  double volume_share(std::uint64_t threshold) const;
};

FrequencyTable build_frequency_table(std::span<const std::string> query_log);

// TSV "query<TAB>count".
void write_frequency_tsv(const std::string& path, const FrequencyTable& table);
FrequencyTable read_frequency_tsv(const std::string& path);

struct KeywordHit {
  std::string keyword;
  double score = 0.0;
  std::size_t rank = 0;
};

std::vector<KeywordHit> render_hits(std::span<const DecodeResult> results,
                                    const Vocabulary& vocab);

struct PrecomputedStore {
  std::map<std::string, std::vector<KeywordHit>> entries;
  std::string model_tag;

  const std::vector<KeywordHit>* find(std::string_view normalized) const;
};

// JSON lines: {"query": ..., "results": [...], "model_tag": ...}.
void write_store_jsonl(const std::string& path, const PrecomputedStore& store);
PrecomputedStore read_store_jsonl(const std::string& path);

struct PrecomputeReport {
  // (query, reason) for queries stored with an empty result list.
  std::vector<std::pair<std::string, std::string>> skipped;
};

// Decodes every query with `beam`. Queries that fail to decode are stored
// with no results and listed in `report`.
PrecomputedStore precompute(std::span<const std::string> queries,
                            const Parameters& offline_params,
                            const Vocabulary& vocab, const KeywordTrie& trie,
                            const BeamConfig& beam,
                            PrecomputeReport* report = nullptr);

struct RouterConfig {
  std::uint64_t frequency_threshold = 2;
  BeamConfig online_beam;
  BeamConfig offline_beam;

  void validate() const;
};

enum class ResultSource { kOfflineCache, kOnlineDecode };
const char* to_string(ResultSource source);

struct ServeResponse {
  std::string query;
  std::vector<KeywordHit> results;
  ResultSource source = ResultSource::kOnlineDecode;
};

ServeResponse serve_request(std::string_view query,
                            const PrecomputedStore& store,
                            const Parameters& online_params,
                            const Vocabulary& vocab, const KeywordTrie& trie,
                            const RouterConfig& config);

// Thread-safe request router with per-source counters. The referenced
// model, vocabulary and trie must outlive the router.
class Router {
 public:
  struct Counters {
    std::uint64_t requests = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t errors = 0;
    double offline_ms = 0.0;
    double online_ms = 0.0;
  };

  Router(PrecomputedStore store, const Parameters& online_params,
         const Vocabulary& vocab, const KeywordTrie& trie,
         RouterConfig config);

  ServeResponse serve(std::string_view query);
  // One wire-protocol request line in, one response line out (no newline).
  std::string handle_line(std::string_view line);
  Counters counters() const;

  const PrecomputedStore& store() const { return store_; }

 private:
  PrecomputedStore store_;
  const Parameters& params_;
  const Vocabulary& vocab_;
  const KeywordTrie& trie_;
  RouterConfig config_;
  mutable std::mutex mu_;
  Counters counters_;
};

std::string response_to_json(const ServeResponse& response);
// The "results" array of a response, as sent on the wire.
std::string hits_to_json(std::span<const KeywordHit> hits);

// Line-delimited JSON over TCP; one thread per connection.
class TcpServer {
 public:
  TcpServer(Router& router, std::string host, std::uint16_t port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  // Binds and starts accepting. Port 0 picks an ephemeral port.
  void start();
  void stop();
  // Blocks until stop() is called or `max_requests` responses were sent
  // (0 = unlimited).
  void wait(std::uint64_t max_requests = 0);
  std::uint16_t port() const { return port_; }
  std::uint64_t served() const { return served_.load(); }

 private:
  void accept_loop();
  void connection_loop(int fd);

  Router& router_;
  std::string host_;
  std::uint16_t port_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> served_{0};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::set<int> client_fds_;
};

// Blocking line client for the TCP protocol.
class LineClient {
 public:
  LineClient(const std::string& host, std::uint16_t port);
  ~LineClient();
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  std::string request(std::string_view line);

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace egrm

#endif  // EGRM_SERVE_H_

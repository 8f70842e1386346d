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

#include <gtest/gtest.h>

#include <algorithm>
#include <thread>

#include <json.hpp>

#include "test_util.h"

namespace egrm {
namespace {

using nlohmann::json;

TEST(FrequencyTableTest, Counts) {
  const std::vector<std::string> log = {"a", "a", "b"};
  const auto t = build_frequency_table(log);
  EXPECT_EQ(t.counts.at("a"), 2u);
  EXPECT_EQ(t.counts.at("b"), 1u);
  EXPECT_EQ(t.total, 3u);
  EXPECT_EQ(t.frequent(2), std::vector<std::string>{"a"});
  EXPECT_DOUBLE_EQ(t.volume_share(2), 2.0 / 3.0);

  const auto empty = build_frequency_table(std::vector<std::string>{});
  EXPECT_TRUE(empty.counts.empty());
  EXPECT_EQ(empty.total, 0u);
}

TEST(FrequencyTableTest, NormalizesKeys) {
  const std::vector<std::string> log = {"Red  Shoes", "red shoes ", "  "};
  const auto t = build_frequency_table(log);
  EXPECT_EQ(t.counts.size(), 1u);
  EXPECT_EQ(t.counts.at("red shoes"), 2u);
  EXPECT_EQ(t.total, 2u);
}

TEST(FrequencyTableTest, ZipfHeadCarriesVolume) {
  std::vector<std::string> queries;
  for (int i = 0; i < 100; ++i) queries.push_back("q" + std::to_string(i));
  const auto log = zipf_workload(queries, 10000, 1.0, 17);
  const auto t = build_frequency_table(log);
  std::vector<std::uint64_t> counts;
  for (const auto& [_, n] : t.counts) counts.push_back(n);
  std::sort(counts.rbegin(), counts.rend());
  std::uint64_t head = 0;
  for (std::size_t i = 0; i < 20 && i < counts.size(); ++i) head += counts[i];
  EXPECT_GE(double(head) / double(t.total), 0.6);
  EXPECT_EQ(t.total, 10000u);
}

TEST(FrequencyTableTest, ThresholdForTopFraction) {
  FrequencyTable t;
  t.counts = {{"a", 10}, {"b", 5}, {"c", 5}, {"d", 1}, {"e", 1}};
  t.total = 22;
  EXPECT_EQ(t.threshold_for_top_fraction(0.2), 10u);
  EXPECT_EQ(t.threshold_for_top_fraction(0.4), 5u);
  EXPECT_EQ(t.threshold_for_top_fraction(1.0), 1u);
  EXPECT_EQ(t.threshold_for_top_fraction(0.0), 10u);
}

TEST(FrequencyTableTest, TsvRoundTrip) {
  TempDir dir;
  const std::vector<std::string> log = {"x y", "x y", "z"};
  const auto t = build_frequency_table(log);
  write_frequency_tsv(dir.file("f.tsv"), t);
  const auto back = read_frequency_tsv(dir.file("f.tsv"));
  EXPECT_EQ(back.counts, t.counts);
  EXPECT_EQ(back.total, t.total);
  write_lines(dir.file("bad.tsv"), std::vector<std::string>{"q\tabc"});
  EXPECT_THROW(read_frequency_tsv(dir.file("bad.tsv")), Error);
}

struct ServeFixture : ShoeFixture {
  Parameters params = noisy_params(tiny_config(8), 11, 1.0);
  BeamConfig beam = [] {
    BeamConfig b;
    b.beam_size = 5;
    return b;
  }();
  RouterConfig router_config() const {
    RouterConfig rc;
    rc.online_beam = beam;
    rc.offline_beam = beam;
    return rc;
  }
};

TEST(PrecomputeTest, DeterministicAndValid) {
  ServeFixture f;
  const std::vector<std::string> qs = {"red", "Blue shoes", "green", "purple"};
  PrecomputeReport rep;
  const auto a = precompute(qs, f.params, f.vocab, f.trie, f.beam, &rep);
  const auto b = precompute(qs, f.params, f.vocab, f.trie, f.beam);
  EXPECT_EQ(a.entries.size(), 4u);
  EXPECT_EQ(a.model_tag, params_tag(f.params));
  for (const auto& [q, hits] : a.entries) {
    const auto& other = b.entries.at(q);
    ASSERT_EQ(hits.size(), other.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      EXPECT_EQ(hits[i].keyword, other[i].keyword);
      EXPECT_EQ(hits[i].score, other[i].score);
      EXPECT_TRUE(f.trie.contains(f.vocab.encode_text(hits[i].keyword)));
    }
  }
  // "purple" is out of vocabulary but still decodes (as UNK).
  EXPECT_TRUE(rep.skipped.empty());
}

TEST(PrecomputeTest, StoreRoundTrip) {
  ServeFixture f;
  TempDir dir;
  const std::vector<std::string> qs = {"red", "blue shoes"};
  const auto s = precompute(qs, f.params, f.vocab, f.trie, f.beam);
  write_store_jsonl(dir.file("store.jsonl"), s);
  const auto back = read_store_jsonl(dir.file("store.jsonl"));
  EXPECT_EQ(back.model_tag, s.model_tag);
  ASSERT_EQ(back.entries.size(), s.entries.size());
  for (const auto& [q, hits] : s.entries) {
    const auto& h2 = back.entries.at(q);
    ASSERT_EQ(h2.size(), hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      EXPECT_EQ(h2[i].keyword, hits[i].keyword);
      EXPECT_EQ(h2[i].score, hits[i].score);
      EXPECT_EQ(h2[i].rank, hits[i].rank);
    }
  }
  const auto lines = read_lines(dir.file("store.jsonl"));
  const auto j = json::parse(lines[0]);
  EXPECT_TRUE(j.contains("query"));
  EXPECT_TRUE(j.contains("results"));
  EXPECT_TRUE(j.contains("model_tag"));
  write_lines(dir.file("bad.jsonl"), std::vector<std::string>{"{not json"});
  EXPECT_THROW(read_store_jsonl(dir.file("bad.jsonl")), Error);
}

TEST(ServeRequestTest, Routing) {
  ServeFixture f;
  const std::vector<std::string> head = {"red"};
  const auto store = precompute(head, f.params, f.vocab, f.trie, f.beam);
  const auto rc = f.router_config();
  const auto hit = serve_request("Red", store, f.params, f.vocab, f.trie, rc);
  EXPECT_EQ(hit.source, ResultSource::kOfflineCache);
  const auto miss = serve_request("blue", store, f.params, f.vocab, f.trie, rc);
  EXPECT_EQ(miss.source, ResultSource::kOnlineDecode);
  EXPECT_FALSE(miss.results.empty());
  const auto empty = serve_request("   ", store, f.params, f.vocab, f.trie, rc);
  EXPECT_EQ(empty.source, ResultSource::kOnlineDecode);
  EXPECT_TRUE(empty.results.empty());
}

TEST(ServeRequestTest, CachedEqualsLive) {
  ServeFixture f;
  const std::vector<std::string> qs = {"red", "blue shoes", "shirt red"};
  const auto store = precompute(qs, f.params, f.vocab, f.trie, f.beam);
  const PrecomputedStore empty;
  const auto rc = f.router_config();
  for (const auto& q : qs) {
    const auto cached = serve_request(q, store, f.params, f.vocab, f.trie, rc);
    const auto live = serve_request(q, empty, f.params, f.vocab, f.trie, rc);
    EXPECT_EQ(cached.source, ResultSource::kOfflineCache);
    EXPECT_EQ(live.source, ResultSource::kOnlineDecode);
    EXPECT_EQ(hits_to_json(cached.results), hits_to_json(live.results));
  }
}

TEST(RouterTest, CountersPartitionRequests) {
  ServeFixture f;
  const std::vector<std::string> head = {"red", "blue"};
  Router router(precompute(head, f.params, f.vocab, f.trie, f.beam), f.params,
                f.vocab, f.trie, f.router_config());
  for (const char* q : {"red", "blue", "shoes", "red", "green shirt"}) router.serve(q);
  const auto c = router.counters();
  EXPECT_EQ(c.requests, 5u);
  EXPECT_EQ(c.hits, 3u);
  EXPECT_EQ(c.misses, 2u);
  EXPECT_EQ(c.hits + c.misses, c.requests);
}

TEST(RouterTest, HandleLine) {
  ServeFixture f;
  const std::vector<std::string> head = {"red"};
  Router router(precompute(head, f.params, f.vocab, f.trie, f.beam), f.params,
                f.vocab, f.trie, f.router_config());
  const auto ok = json::parse(router.handle_line(R"({"query": "red"})"));
  EXPECT_EQ(ok["query"], "red");
  EXPECT_EQ(ok["source"], "offline-cache");
  ASSERT_TRUE(ok["results"].is_array());
  for (const auto& r : ok["results"]) {
    EXPECT_TRUE(r["keyword"].is_string());
    EXPECT_TRUE(r["score"].is_number());
  }
  for (const char* bad : {"not json", "[1,2]", R"({"q": "red"})", R"({"query": 3})"}) {
    const auto err = json::parse(router.handle_line(bad));
    EXPECT_TRUE(err.contains("error")) << bad;
  }
  EXPECT_EQ(router.counters().errors, 4u);
  EXPECT_EQ(router.counters().requests, 1u);
}

TEST(RouterTest, RejectsBadThreshold) {
  ServeFixture f;
  RouterConfig rc = f.router_config();
  rc.frequency_threshold = 0;
  EXPECT_THROW(Router(PrecomputedStore{}, f.params, f.vocab, f.trie, rc), Error);
}

TEST(TcpServerTest, LineProtocol) {
  ServeFixture f;
  const std::vector<std::string> head = {"red"};
  Router router(precompute(head, f.params, f.vocab, f.trie, f.beam), f.params,
                f.vocab, f.trie, f.router_config());
  TcpServer server(router, "127.0.0.1", 0);
  server.start();
  ASSERT_NE(server.port(), 0);
  {
    LineClient client("127.0.0.1", server.port());
    const auto a = json::parse(client.request(R"({"query":"red"})"));
    EXPECT_EQ(a["source"], "offline-cache");
    const auto b = json::parse(client.request(R"({"query":"blue shoes"})"));
    EXPECT_EQ(b["source"], "online-decode");
    const auto c = json::parse(client.request("garbage"));
    EXPECT_TRUE(c.contains("error"));
  }
  // Concurrent clients.
  std::vector<std::thread> threads;
  std::vector<int> ok(4, 0);
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      LineClient client("127.0.0.1", server.port());
      for (int i = 0; i < 5; ++i) {
        const auto r = json::parse(client.request(R"({"query":"red shoes"})"));
        ok[t] += r.contains("results");
      }
    });
  }
  for (auto& th : threads) th.join();
  for (int v : ok) EXPECT_EQ(v, 5);
  server.stop();
  EXPECT_EQ(server.served(), 23u);
  const auto c = router.counters();
  EXPECT_EQ(c.hits + c.misses, c.requests);
  EXPECT_EQ(c.requests, 22u);
}

TEST(TcpServerTest, WaitForRequestCount) {
  ServeFixture f;
  Router router(PrecomputedStore{}, f.params, f.vocab, f.trie, f.router_config());
  TcpServer server(router, "127.0.0.1", 0);
  server.start();
  std::thread client([&] {
    LineClient c("127.0.0.1", server.port());
    c.request(R"({"query":"red"})");
    c.request(R"({"query":"blue"})");
  });
  server.wait(2);
  client.join();
  server.stop();
  EXPECT_EQ(server.served(), 2u);
  EXPECT_THROW(LineClient("127.0.0.1", server.port()), Error);
}

}  // namespace
}  // namespace egrm

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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.h"
#include "egrm/corpus.h"
#include "egrm/serve.h"
#include "egrm/trie.h"
#include "test_util.h"

namespace egrm {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& argv) {
  std::ostringstream out, err;
  const int code = cli::run(argv, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// Small corpus, vocabulary and a one-epoch model, shared by the tests.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    const std::string d = dir_->path().string();
    ASSERT_EQ(run({"gen-data", "--pairs", "600", "--keywords", "400", "--queries", "6",
                   "--log-draws", "300", "--log-distinct", "40", "--out-dir", d})
                  .code,
              0);
    ASSERT_EQ(run({"build-vocab", "--corpus", f("corpus.tsv"), "--out", f("vocab.txt")}).code, 0);
    ASSERT_EQ(run({"train", "--corpus", f("corpus.tsv"), "--vocab", f("vocab.txt"), "--epochs",
                   "2", "--embed-dim", "8", "--hidden-dim", "12", "--out", f("model.bin")})
                  .code,
              0);
  }
  static void TearDownTestSuite() { delete dir_; }

  static std::string f(const std::string& name) { return dir_->file(name); }

  static std::vector<std::string> model_args() {
    return {"--params", f("model.bin"), "--vocab", f("vocab.txt"), "--keywords",
            f("keywords.txt")};
  }

  static TempDir* dir_;
};

TempDir* CliTest::dir_ = nullptr;

TEST(CliContract, UnknownFlagFailsWithUsage) {
  const CliRun r = run({"trie-stats", "--bogus"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(CliContract, MissingSubcommandFails) {
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"no-such-command"}).code, 0);
}

TEST(CliContract, MissingFileIsOneLineDiagnostic) {
  const CliRun r = run({"build-vocab", "--corpus", "/nonexistent/corpus.tsv", "--out", "/tmp/x"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(CliContract, HelpExitsZero) {
  const CliRun r = run({"decode", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--no-drop-otf"), std::string::npos);
}

TEST(ManifestTest, RoundTripsAndRebuildsArgv) {
  TempDir dir;
  cli::RunManifest m;
  m.command = "decode";
  m.tool_version = kVersion;
  m.seed = "3";
  m.args = {{"--beam", "7"}, {"--no-trie", "true"}, {"--no-self-norm", "false"}};
  m.outputs = {{"results", "r.json"}};
  cli::write_manifest(dir.file("m.json"), m);
  const auto back = cli::read_manifest(dir.file("m.json"));
  EXPECT_EQ(back.command, "decode");
  EXPECT_EQ(back.args, m.args);
  EXPECT_EQ(back.outputs, m.outputs);
  EXPECT_EQ(back.to_argv(),
            (std::vector<std::string>{"decode", "--beam", "7", "--no-trie"}));
}

TEST(ManifestTest, MalformedManifestThrows) {
  TempDir dir;
  std::ofstream(dir.file("bad.json")) << "{not json";
  EXPECT_THROW(cli::read_manifest(dir.file("bad.json")), Error);
  EXPECT_NE(run({"replay", dir.file("bad.json")}).code, 0);
}

TEST_F(CliTest, GenDataWritesManifestAndIsDeterministic) {
  const auto m = cli::read_manifest(f("gen-data.manifest.json"));
  EXPECT_EQ(m.command, "gen-data");
  EXPECT_EQ(m.seed, "7");
  EXPECT_EQ(m.tool_version, kVersion);
  TempDir again;
  ASSERT_EQ(run({"gen-data", "--pairs", "600", "--keywords", "400", "--queries", "6",
                 "--log-draws", "300", "--log-distinct", "40", "--out-dir", again.path().string()})
                .code,
            0);
  for (const char* name : {"corpus.tsv", "keywords.txt", "queries.txt", "query_log.txt"})
    EXPECT_EQ(slurp(f(name)), slurp(again.file(name))) << name;
}

TEST_F(CliTest, TrainEmitsMetricsAndReplaysBitExactly) {
  std::ifstream metrics(f("model.bin.metrics.jsonl"));
  std::size_t lines = 0;
  for (std::string line; std::getline(metrics, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch").get<std::size_t>(), lines + 1);
    EXPECT_TRUE(j.contains("loss"));
    EXPECT_TRUE(j.contains("mean_abs_logZ"));
  }
  EXPECT_EQ(lines, 2u);

  const std::string before = slurp(f("model.bin"));
  const CliRun r = run({"replay", f("train.manifest.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(f("model.bin")), before);
}

TEST_F(CliTest, TrieStatsPrintsCsv) {
  const CliRun r = run({"trie-stats", "--keywords", f("keywords.txt"), "--vocab", f("vocab.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("depth,avg_suffixes\n0,", 0), 0u);
}

TEST_F(CliTest, DecodeWithTrieIsClosedSet) {
  auto args = model_args();
  args.insert(args.begin(), "decode");
  args.insert(args.end(), {"--queries-file", f("queries.txt"), "--beam", "8", "--threshold",
                           "none", "--out", f("decoded.jsonl")});
  const CliRun r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;

  std::set<std::string> keywords;
  for (const auto& k : read_lines(f("keywords.txt"))) keywords.insert(normalize_text(k));
  std::ifstream in(f("decoded.jsonl"));
  std::size_t lines = 0, results = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    const auto parsed = nlohmann::json::parse(line);
    for (const auto& hit : parsed.at("results")) {
      ++results;
      EXPECT_TRUE(keywords.count(hit.at("keyword").get<std::string>()));
    }
  }
  EXPECT_EQ(lines, 6u);
  EXPECT_GT(results, 0u);

  const std::string before = slurp(f("decoded.jsonl"));
  ASSERT_EQ(run({"replay", f("decode.manifest.json")}).code, 0);
  EXPECT_EQ(slurp(f("decoded.jsonl")), before);
}

TEST_F(CliTest, DecodeNeedsExactlyOneQuerySource) {
  auto args = model_args();
  args.insert(args.begin(), "decode");
  EXPECT_NE(run(args).code, 0);
}

TEST_F(CliTest, DecodeWithoutTrieRuns) {
  auto args = model_args();
  args.insert(args.begin(), "decode");
  for (const char* a : {"--query", "blue shoes", "--beam", "5", "--no-trie"}) args.push_back(a);
  const CliRun r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).size(), 5u);
}

TEST_F(CliTest, BenchWritesReports) {
  TempDir out;
  auto args = model_args();
  args.insert(args.begin(), "bench");
  for (const char* a : {"--beams", "2,4", "--strategies", "baseline,sn+tp", "--repetitions",
                        "1", "--warmups", "0", "--validity-beams", "3"})
    args.push_back(a);
  args.insert(args.end(), {"--queries", f("queries.txt"), "--out-dir", out.path().string()});
  const CliRun r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_lines(out.file("bench.csv"));
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[0], "strategy,beam_size,mean_decode_ms,query_count");
  EXPECT_EQ(read_lines(out.file("validity.csv"))[0], "beam_size,validity_fraction");
  EXPECT_TRUE(std::filesystem::exists(out.file("bench.manifest.json")));

  args.push_back("--strategies");
  args.push_back("warp");
  EXPECT_NE(run(args).code, 0);
}

TEST_F(CliTest, PrecomputeThenServeReplay) {
  CliRun r = run({"precompute", "--query-log", f("query_log.txt"), "--offline-params",
               f("model.bin"), "--vocab", f("vocab.txt"), "--keywords", f("keywords.txt"),
               "--beam", "4", "--out", f("store.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = read_frequency_tsv(f("frequency.tsv"));
  EXPECT_EQ(table.total, 300u);

  r = run({"serve", "--store", f("store.jsonl"), "--online-params", f("model.bin"), "--vocab",
           f("vocab.txt"), "--keywords", f("keywords.txt"), "--port", "0", "--beam", "4",
           "--replay-log", f("query_log.txt"), "--responses-out", f("responses.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto counters = nlohmann::json::parse(r.out);
  EXPECT_EQ(counters.at("requests").get<int>(), 300);
  EXPECT_EQ(counters.at("hits").get<int>() + counters.at("misses").get<int>(), 300);
  EXPECT_EQ(counters.at("errors").get<int>(), 0);
  EXPECT_NEAR(counters.at("hit_rate").get<double>(), table.volume_share(2), 1e-12);
  EXPECT_EQ(read_lines(f("responses.jsonl")).size(), 300u);
}

}  // namespace
}  // namespace egrm

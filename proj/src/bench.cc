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

#include "egrm/bench.h"

#include <pthread.h>
#include <sched.h>
#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace egrm {

Strategy parse_strategy(const std::string& name) {
  Strategy s;
  s.name = name;
  if (name == "baseline") return s;
  std::stringstream ss(name);
  std::string part;
  bool any = false;
  while (std::getline(ss, part, '+')) {
    if (part == "sn") s.use_self_norm = true;
    else if (part == "tp") s.use_trie = true;
    else if (part == "dropotf") s.use_drop_otf = true;
    else if (part == "baseline") continue;
    else throw Error("unknown strategy component '" + part + "' in '" + name + "'");
    any = true;
  }
  if (!any) throw Error("empty strategy '" + name + "'");
  return s;
}

std::vector<Strategy> standard_strategies() {
  return {parse_strategy("baseline"), parse_strategy("sn+tp"),
          parse_strategy("sn+tp+dropotf")};
}

std::vector<std::size_t> standard_beam_sizes() { return {40, 60, 80, 100}; }

BeamConfig beam_config_for(const Strategy& strategy, std::size_t beam_size,
                           double score_threshold, std::size_t max_steps) {
  BeamConfig c;
  c.beam_size = beam_size;
  c.score_threshold = score_threshold;
  c.use_trie = strategy.use_trie;
  c.use_self_norm = strategy.use_self_norm;
  c.use_drop_otf = strategy.use_drop_otf;
  c.max_steps = max_steps;
  return c;
}

const BenchRow* BenchReport::find(const std::string& strategy,
                                  std::size_t beam) const {
  for (const auto& r : rows)
    if (r.strategy == strategy && r.beam_size == beam) return &r;
  return nullptr;
}

std::string machine_descriptor() {
  std::ostringstream os;
  utsname u{};
  if (::uname(&u) == 0) os << u.sysname << ' ' << u.release << ' ' << u.machine;
  os << "; cpus=" << std::thread::hardware_concurrency();
#if defined(__clang__)
  os << "; clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  os << "; gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#endif
#ifdef NDEBUG
  os << "; optimized";
#else
  os << "; debug";
#endif
  return os.str();
}

namespace {

struct CellTask {
  Strategy strategy;
  std::size_t beam = 0;
  BeamConfig config;
  std::vector<double> pass_means;
  double evals = 0.0, results = 0.0;
  BenchRow row;
};

void warm_up(const Parameters& params, const KeywordTrie& trie,
             std::span<const TokenSeq> queries, const TimingOptions& opt,
             const CellTask& task) {
  for (std::size_t w = 0; w < opt.warmups; ++w)
    for (const auto& q : queries) beam_search(params, q, &trie, task.config);
}

void timed_pass(const Parameters& params, const KeywordTrie& trie,
                std::span<const TokenSeq> queries, CellTask& task) {
  using clock = std::chrono::steady_clock;
  const bool first = task.pass_means.empty();
  double total_ms = 0.0;
  for (const auto& q : queries) {
    DecodeStats stats;
    const auto start = clock::now();
    const auto out = beam_search(params, q, &trie, task.config, &stats);
    total_ms += std::chrono::duration<double, std::milli>(clock::now() - start).count();
    if (first) {
      task.evals += static_cast<double>(stats.score_evaluations);
      task.results += static_cast<double>(out.size());
    }
  }
  task.pass_means.push_back(total_ms / static_cast<double>(queries.size()));
}

void finish(std::size_t query_count, CellTask& task) {
  auto& m = task.pass_means;
  std::sort(m.begin(), m.end());
  const std::size_t n = m.size();
  const double median = n % 2 ? m[n / 2] : 0.5 * (m[n / 2 - 1] + m[n / 2]);
  const auto qn = static_cast<double>(query_count);
  task.row = {task.strategy.name, task.beam, median, query_count,
              task.evals / qn, task.results / qn};
}

}  // namespace

BenchReport run_timing(const Parameters& params, const KeywordTrie& trie,
                       std::span<const TokenSeq> queries,
                       std::span<const std::size_t> beam_sizes,
                       std::span<const Strategy> strategies,
                       const TimingOptions& options) {
  if (queries.empty()) throw Error("bench: no queries");
  std::vector<CellTask> tasks;
  for (const auto& s : strategies)
    for (std::size_t b : beam_sizes) {
      CellTask& t = tasks.emplace_back();
      t.strategy = s;
      t.beam = b;
      t.config = beam_config_for(s, b, options.score_threshold, options.max_steps);
    }
  const std::size_t reps = std::max<std::size_t>(options.repetitions, 1);

  BenchReport report;
  report.environment = machine_descriptor();
  if (options.parallel_cells) {
    const unsigned cpus = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      threads.emplace_back([&, i] {
        cpu_set_t set;
        CPU_ZERO(&set);
        CPU_SET(static_cast<int>(i % cpus), &set);
        pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
        warm_up(params, trie, queries, options, tasks[i]);
        for (std::size_t rep = 0; rep < reps; ++rep)
          timed_pass(params, trie, queries, tasks[i]);
      });
    }
    for (auto& t : threads) t.join();
    report.environment += "; cells=parallel, pinned round-robin over " +
                          std::to_string(cpus) + " cpus";
  } else {
    // Passes are interleaved across cells so machine-load drift spreads
    // over every cell instead of landing on whichever ran at the time.
    for (const auto& task : tasks) warm_up(params, trie, queries, options, task);
    for (std::size_t rep = 0; rep < reps; ++rep)
      for (auto& task : tasks) timed_pass(params, trie, queries, task);
    report.environment += "; cells=sequential, passes interleaved";
  }
  for (auto& t : tasks) {
    finish(queries.size(), t);
    report.rows.push_back(t.row);
  }
  return report;
}

std::vector<ValidityPoint> run_validity(const Parameters& params,
                                        const KeywordTrie& trie,
                                        std::span<const TokenSeq> queries,
                                        std::span<const std::size_t> beam_sizes,
                                        std::size_t max_steps) {
  if (queries.empty()) throw Error("bench: no queries");
  std::vector<ValidityPoint> curve;
  const Strategy free_run = parse_strategy("baseline");
  const Strategy trie_run = parse_strategy("tp");
  for (std::size_t beam : beam_sizes) {
    ValidityPoint p;
    p.beam_size = beam;
    const BeamConfig cfg_free = beam_config_for(free_run, beam, kNoThreshold, max_steps);
    const BeamConfig cfg_trie = beam_config_for(trie_run, beam, kNoThreshold, max_steps);
    for (const auto& q : queries) {
      const auto free_out = beam_search(params, q, &trie, cfg_free);
      const auto trie_out = beam_search(params, q, &trie, cfg_trie);
      p.validity_fraction += validity_fraction(free_out, trie);
      p.trie_validity_fraction += validity_fraction(trie_out, trie);
      p.mean_results += static_cast<double>(free_out.size());
    }
    const auto n = static_cast<double>(queries.size());
    p.validity_fraction /= n;
    p.trie_validity_fraction /= n;
    p.mean_results /= n;
    curve.push_back(p);
  }
  return curve;
}

void write_report_csv(std::ostream& out, const BenchReport& report) {
  out << "strategy,beam_size,mean_decode_ms,query_count\n";
  for (const auto& r : report.rows)
    out << r.strategy << ',' << r.beam_size << ',' << r.mean_decode_ms << ','
        << r.query_count << '\n';
}

void write_report_json(std::ostream& out, const BenchReport& report) {
  nlohmann::ordered_json j;
  j["environment"] = report.environment;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows)
    j["rows"].push_back({{"strategy", r.strategy},
                         {"beam_size", r.beam_size},
                         {"mean_decode_ms", r.mean_decode_ms},
                         {"query_count", r.query_count},
                         {"mean_score_evaluations", r.mean_score_evaluations},
                         {"mean_results", r.mean_results}});
  out << j.dump(2) << '\n';
}

void write_validity_csv(std::ostream& out,
                        std::span<const ValidityPoint> curve) {
  out << "beam_size,validity_fraction\n";
  for (const auto& p : curve) out << p.beam_size << ',' << p.validity_fraction << '\n';
}

}  // namespace egrm

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

// Decode-time and output-validity measurements across beam sizes and
// decoding strategies.

#ifndef EGRM_BENCH_H_
#define EGRM_BENCH_H_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "egrm/decode.h"

namespace egrm {

struct Strategy {
  std::string name;
  bool use_self_norm = false;
  bool use_trie = false;
  bool use_drop_otf = false;
};

// "baseline", or '+'-joined flags from {sn, tp, dropotf}, e.g. "sn+tp".
Strategy parse_strategy(const std::string& name);
// baseline, sn+tp, sn+tp+dropotf.
std::vector<Strategy> standard_strategies();
std::vector<std::size_t> standard_beam_sizes();  // 40, 60, 80, 100

BeamConfig beam_config_for(const Strategy& strategy, std::size_t beam_size,
                           double score_threshold, std::size_t max_steps);

struct TimingOptions {
  std::size_t repetitions = 5;
  std::size_t warmups = 2;
  // Threshold handed to every strategy; only DropOTF uses it during search.
  double score_threshold = -8.0;
  // 0 derives the cap from the trie.
  std::size_t max_steps = 0;
  // Runs cells on separate threads, each pinned to one CPU.
  bool parallel_cells = false;
};

struct BenchRow {
  std::string strategy;
  std::size_t beam_size = 0;
  double mean_decode_ms = 0.0;
  std::size_t query_count = 0;
  double mean_score_evaluations = 0.0;
  double mean_results = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::string environment;

  const BenchRow* find(const std::string& strategy, std::size_t beam) const;
};

// Each cell decodes the whole query set `warmups` times unmeasured, then
// `repetitions` times; the reported time is the median of the per-pass
// mean decode times. Sequential runs interleave the measured passes
// round-robin over cells.
BenchReport run_timing(const Parameters& params, const KeywordTrie& trie,
                       std::span<const TokenSeq> queries,
                       std::span<const std::size_t> beam_sizes,
                       std::span<const Strategy> strategies,
                       const TimingOptions& options = {});

struct ValidityPoint {
  std::size_t beam_size = 0;
  double validity_fraction = 0.0;       // without the trie
  double trie_validity_fraction = 0.0;  // control row, with the trie
  double mean_results = 0.0;            // per query, without the trie
};

// Mean per-query validity of full-softmax decoding without and with the
// trie.
std::vector<ValidityPoint> run_validity(const Parameters& params,
                                        const KeywordTrie& trie,
                                        std::span<const TokenSeq> queries,
                                        std::span<const std::size_t> beam_sizes,
                                        std::size_t max_steps = 0);

// "strategy,beam_size,mean_decode_ms,query_count"
void write_report_csv(std::ostream& out, const BenchReport& report);
void write_report_json(std::ostream& out, const BenchReport& report);
// "beam_size,validity_fraction"
void write_validity_csv(std::ostream& out,
                        std::span<const ValidityPoint> curve);

std::string machine_descriptor();

}  // namespace egrm

#endif  // EGRM_BENCH_H_

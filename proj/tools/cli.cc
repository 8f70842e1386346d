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

#include "cli.h"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "egrm/bench.h"
#include "egrm/corpus.h"
#include "egrm/decode.h"
#include "egrm/model.h"
#include "egrm/serve.h"
#include "egrm/trie.h"

namespace egrm::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<std::string> RunManifest::to_argv() const {
  std::vector<std::string> argv{command};
  for (const auto& [name, value] : args) {
    if (value == "true") {
      argv.push_back(name);
    } else if (value != "false") {
      argv.push_back(name);
      argv.push_back(value);
    }
  }
  return argv;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  ordered_json j;
  j["command"] = m.command;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed;
  auto section = [](const std::vector<std::pair<std::string, std::string>>& kv) {
    ordered_json o = ordered_json::object();
    for (const auto& [k, v] : kv) o[k] = v;
    return o;
  };
  j["args"] = section(m.args);
  j["inputs"] = section(m.inputs);
  j["outputs"] = section(m.outputs);
  std::ofstream f(path);
  if (!f) throw Error("cannot write manifest " + path);
  f << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open manifest " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const std::exception& e) {
    throw Error("malformed manifest " + path + ": " + e.what());
  }
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.value("tool_version", "");
    m.seed = j.value("seed", "");
    auto section = [&](const char* key) {
      std::vector<std::pair<std::string, std::string>> kv;
      if (j.contains(key))
        for (const auto& [k, v] : j[key].items()) kv.emplace_back(k, v.get<std::string>());
      return kv;
    };
    m.args = section("args");
    m.inputs = section("inputs");
    m.outputs = section("outputs");
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed manifest " + path + ": " + e.what());
  }
  return m;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep))
    if (!part.empty()) parts.push_back(part);
  return parts;
}

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  for (const auto& p : split(csv, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(p, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != p.size() || v <= 0) throw Error("not a positive integer: '" + p + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

double parse_threshold(const std::string& s) {
  if (s == "none" || s == "-inf") return kNoThreshold;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw Error("bad score threshold '" + s + "'");
  return v;
}

std::string parent_dir(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

struct Loaded {
  Vocabulary vocab;
  KeywordTrie trie;
};

Loaded load_vocab_and_trie(const std::string& vocab_path,
                           const std::string& keywords_path, std::ostream& err) {
  Loaded l{Vocabulary::load(vocab_path), {}};
  std::size_t skipped = 0;
  const auto encoded = encode_keywords(l.vocab, read_lines(keywords_path), &skipped);
  if (encoded.empty()) throw Error("no keyword of " + keywords_path + " fits the vocabulary");
  if (skipped) err << "note: skipped " << skipped << " keywords with unknown tokens\n";
  l.trie = build_trie(encoded);
  return l;
}

BeamConfig beam_from_flags(std::size_t beam, const std::string& threshold,
                           bool no_trie, bool no_self_norm, bool no_drop_otf,
                           std::size_t max_steps) {
  BeamConfig c;
  c.beam_size = beam;
  c.score_threshold = parse_threshold(threshold);
  c.use_trie = !no_trie;
  c.use_self_norm = !no_self_norm;
  c.use_drop_otf = !no_drop_otf;
  c.max_steps = max_steps;
  return c;
}

// Snapshot of every option of `sub` after parsing.
RunManifest manifest_for(const CLI::App& sub) {
  RunManifest m;
  m.command = sub.get_name();
  m.tool_version = kVersion;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name();
    if (name.empty() || name == "--help" || opt->get_positional()) continue;
    if (opt->get_expected_max() == 0) {
      m.args.emplace_back(name, opt->count() ? "true" : "false");
    } else if (opt->count()) {
      m.args.emplace_back(name, opt->as<std::string>());
    } else if (!opt->get_default_str().empty()) {
      m.args.emplace_back(name, opt->get_default_str());
    }
    if (name == "--seed") m.seed = m.args.back().second;
  }
  return m;
}

struct Command {
  CLI::App* app = nullptr;
  std::function<void(RunManifest&)> body;
  // Directory that receives <command>.manifest.json.
  std::function<std::string()> manifest_dir;
};

class Tool {
 public:
  Tool(std::ostream& out, std::ostream& err) : out_(out), err_(err) {
    app_.require_subcommand(1);
    app_.option_defaults()->always_capture_default();
    app_.set_version_flag("--version", std::string(kVersion));
    add_gen_data();
    add_build_vocab();
    add_train();
    add_trie_stats();
    add_decode();
    add_bench();
    add_precompute();
    add_serve();
    add_pipeline();
    add_replay();
  }

  int run(std::vector<std::string> argv) {
    std::reverse(argv.begin(), argv.end());
    try {
      app_.parse(argv);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app_.exit(e, out_, err_);
      err_ << "error: " << e.what() << '\n';
      const CLI::App* failing = &app_;
      for (const auto& c : commands_)
        if (c.app->parsed()) failing = c.app;
      err_ << failing->help();
      return e.get_exit_code() ? e.get_exit_code() : 2;
    }
    for (auto& c : commands_) {
      if (!c.app->parsed()) continue;
      try {
        RunManifest m = manifest_for(*c.app);
        c.body(m);
        if (c.manifest_dir) {
          const std::string dir = c.manifest_dir();
          if (!dir.empty()) {
            fs::create_directories(dir);
            write_manifest(join_path(dir, m.command + ".manifest.json"), m);
          }
        }
      } catch (const std::exception& e) {
        err_ << "error: " << e.what() << '\n';
        return 1;
      }
      return 0;
    }
    return 1;
  }

 private:
  Command& add(const std::string& name, const std::string& help) {
    commands_.push_back({app_.add_subcommand(name, help), {}, {}});
    return commands_.back();
  }

  void add_gen_data() {
    auto& c = add("gen-data", "Generate the seeded synthetic corpus, keywords and queries");
    auto* o = &gen_;
    c.app->add_option("--seed", o->spec.seed, "Generator seed");
    c.app->add_option("--pairs", o->spec.num_pairs, "Query-title pairs");
    c.app->add_option("--keywords", o->spec.keyword_count, "Keyword set size");
    c.app->add_option("--templates", o->spec.template_count, "Query templates in use");
    c.app->add_option("--overlap", o->spec.overlap_fraction,
                      "Share of keywords appearing verbatim as titles");
    c.app->add_option("--queries", o->queries, "Benchmark queries");
    c.app->add_option("--log-distinct", o->log_distinct, "Distinct queries in the traffic log");
    c.app->add_option("--log-draws", o->log_draws, "Requests in the traffic log");
    c.app->add_option("--zipf", o->zipf, "Zipf exponent of the traffic log");
    c.app->add_option("--out-dir", o->out_dir, "Output directory")->required();
    c.manifest_dir = [o] { return o->out_dir; };
    c.body = [this, o](RunManifest& m) {
      const SyntheticData data = generate_synthetic(o->spec);
      fs::create_directories(o->out_dir);
      const auto corpus = join_path(o->out_dir, "corpus.tsv");
      const auto keywords = join_path(o->out_dir, "keywords.txt");
      const auto queries = join_path(o->out_dir, "queries.txt");
      const auto log = join_path(o->out_dir, "query_log.txt");
      write_corpus(corpus, data.corpus);
      write_lines(keywords, data.keywords);
      write_lines(queries, synthetic_queries(o->spec, o->queries, 1));
      const auto pool = synthetic_queries(o->spec, o->log_distinct, 2);
      write_lines(log, zipf_workload(pool, o->log_draws, o->zipf, o->spec.seed + 1));
      m.outputs = {{"corpus", corpus}, {"keywords", keywords},
                   {"queries", queries}, {"query_log", log}};
      out_ << "wrote " << data.corpus.size() << " pairs, " << data.keywords.size()
           << " keywords to " << o->out_dir << '\n';
    };
  }

  void add_build_vocab() {
    auto& c = add("build-vocab", "Build the token vocabulary from a corpus");
    auto* o = &vocab_;
    c.app->add_option("--corpus", o->corpus, "Corpus TSV")->required()->check(CLI::ExistingFile);
    c.app->add_option("--max-size", o->max_size, "Vocabulary cap including reserved tokens");
    c.app->add_option("--out", o->out, "Vocabulary file")->required();
    c.manifest_dir = [o] { return parent_dir(o->out); };
    c.body = [this, o](RunManifest& m) {
      const auto vocab = build_vocab(read_corpus(o->corpus), o->max_size);
      vocab.save(o->out);
      m.inputs = {{"corpus", o->corpus}};
      m.outputs = {{"vocab", o->out}};
      out_ << "vocabulary of " << vocab.size() << " tokens written to " << o->out << '\n';
    };
  }

  void add_train() {
    auto& c = add("train", "Train the encoder-decoder; prints metrics as JSON lines");
    auto* o = &train_;
    c.app->add_option("--corpus", o->corpus, "Corpus TSV")->required()->check(CLI::ExistingFile);
    c.app->add_option("--vocab", o->vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--out", o->out, "Parameter file")->required();
    c.app->add_option("--metrics", o->metrics, "Metrics JSON lines (default <out>.metrics.jsonl)");
    c.app->add_option("--cell", o->cell, "gru or lstm");
    c.app->add_option("--attention", o->attention, "additive or dot");
    c.app->add_option("--encoder-layers", o->config.encoder_layers, "Encoder layers");
    c.app->add_option("--decoder-layers", o->config.decoder_layers, "Decoder layers");
    c.app->add_flag("--no-residual", o->no_residual, "Disable residual connections");
    c.app->add_option("--embed-dim", o->config.embed_dim, "Embedding size");
    c.app->add_option("--hidden-dim", o->config.hidden_dim, "Hidden size");
    c.app->add_option("--epochs", o->hyper.epochs, "Passes over the corpus");
    c.app->add_option("--batch-size", o->hyper.batch_size, "Pairs per update");
    c.app->add_option("--lr", o->hyper.learning_rate, "Adam learning rate");
    c.app->add_option("--lr-decay", o->hyper.lr_decay, "Learning-rate factor per epoch");
    c.app->add_option("--beta", o->hyper.beta, "Self-normalization weight");
    c.app->add_option("--heldout", o->hyper.heldout_fraction, "Held-out share");
    c.app->add_option("--seed", o->hyper.seed, "Initialization and shuffling seed");
    c.manifest_dir = [o] { return parent_dir(o->out); };
    c.body = [this, o](RunManifest& m) {
      const auto vocab = Vocabulary::load(o->vocab);
      const auto pairs = encode_corpus(vocab, read_corpus(o->corpus));
      ModelConfig config = o->config;
      config.vocab_size = static_cast<std::uint32_t>(vocab.size());
      config.cell = parse_cell_type(o->cell);
      config.attention = parse_attention_kind(o->attention);
      config.residual = !o->no_residual;
      const std::string metrics = o->metrics.empty() ? o->out + ".metrics.jsonl" : o->metrics;
      std::ofstream mf(metrics);
      if (!mf) throw Error("cannot write " + metrics);
      const auto result = train(pairs, config, o->hyper, [&](const EpochMetrics& e) {
        ordered_json j;
        j["epoch"] = e.epoch;
        j["loss"] = e.loss;
        j["mean_abs_logZ"] = e.mean_abs_log_z;
        mf << j.dump() << '\n';
        mf.flush();
        out_ << j.dump() << std::endl;
      });
      save_params(result.params, o->out);
      m.inputs = {{"corpus", o->corpus}, {"vocab", o->vocab}};
      m.outputs = {{"params", o->out}, {"metrics", metrics}};
    };
  }

  void add_trie_stats() {
    auto& c = add("trie-stats", "Print average suffix counts per trie depth as CSV");
    auto* o = &trie_;
    c.app->add_option("--keywords", o->keywords, "Keyword file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--vocab", o->vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--out", o->out, "CSV file (default stdout)");
    c.manifest_dir = [o] { return o->out.empty() ? std::string() : parent_dir(o->out); };
    c.body = [this, o](RunManifest& m) {
      const auto l = load_vocab_and_trie(o->vocab, o->keywords, err_);
      const auto stats = l.trie.layer_stats();
      if (o->out.empty()) {
        write_layer_stats_csv(out_, stats);
      } else {
        std::ofstream f(o->out);
        if (!f) throw Error("cannot write " + o->out);
        write_layer_stats_csv(f, stats);
        m.outputs = {{"trie_stats", o->out}};
      }
      m.inputs = {{"keywords", o->keywords}, {"vocab", o->vocab}};
    };
  }

  void add_decode() {
    auto& c = add("decode", "Decode queries into keywords; prints JSON");
    auto* o = &decode_;
    c.app->add_option("--params", o->params, "Parameter file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--vocab", o->vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--keywords", o->keywords, "Keyword file")->required()->check(CLI::ExistingFile);
    auto* q = c.app->add_option("--query", o->query, "Query text");
    auto* qf = c.app->add_option("--queries-file", o->queries_file, "One query per line")
                   ->check(CLI::ExistingFile);
    q->excludes(qf);
    c.app->add_option("--beam", o->beam, "Beam size")->check(CLI::PositiveNumber);
    c.app->add_option("--threshold", o->threshold, "Score threshold, or none");
    c.app->add_flag("--no-trie", o->no_trie, "Decode over the full vocabulary");
    c.app->add_flag("--no-self-norm", o->no_self_norm, "Use exact softmax scores");
    c.app->add_flag("--no-drop-otf", o->no_drop_otf, "Apply the threshold only at the end");
    c.app->add_option("--max-steps", o->max_steps, "Step cap; 0 derives it from the trie");
    c.app->add_option("--out", o->out, "Output file (default stdout)");
    c.manifest_dir = [o] { return o->out.empty() ? std::string() : parent_dir(o->out); };
    c.body = [this, o](RunManifest& m) {
      if (o->query.empty() == o->queries_file.empty())
        throw Error("give exactly one of --query and --queries-file");
      const auto l = load_vocab_and_trie(o->vocab, o->keywords, err_);
      const auto params = load_params(o->params);
      const auto cfg = beam_from_flags(o->beam, o->threshold, o->no_trie,
                                       o->no_self_norm, o->no_drop_otf, o->max_steps);
      auto run_one = [&](const std::string& text) {
        const auto ids = l.vocab.encode_text(text);
        const auto hits = render_hits(beam_search(params, ids, &l.trie, cfg), l.vocab);
        ordered_json arr = ordered_json::array();
        for (const auto& h : hits)
          arr.push_back({{"keyword", h.keyword}, {"score", h.score}, {"rank", h.rank}});
        return arr;
      };
      std::ostringstream body;
      if (!o->query.empty()) {
        body << run_one(o->query).dump(2) << '\n';
      } else {
        for (const auto& text : read_lines(o->queries_file)) {
          ordered_json line;
          line["query"] = text;
          line["results"] = run_one(text);
          body << line.dump() << '\n';
        }
      }
      if (o->out.empty()) {
        out_ << body.str();
      } else {
        std::ofstream f(o->out);
        if (!f) throw Error("cannot write " + o->out);
        f << body.str();
        m.outputs = {{"results", o->out}};
      }
      m.inputs = {{"params", o->params}, {"vocab", o->vocab}, {"keywords", o->keywords}};
      if (!o->queries_file.empty()) m.inputs.emplace_back("queries", o->queries_file);
    };
  }

  void add_bench() {
    auto& c = add("bench", "Time decoding strategies and measure output validity");
    auto* o = &bench_;
    c.app->add_option("--params", o->params, "Parameter file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--vocab", o->vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--keywords", o->keywords, "Keyword file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--queries", o->queries, "Query file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--beams", o->beams, "Comma-separated beam sizes");
    c.app->add_option("--strategies", o->strategies,
                      "Comma-separated strategies: baseline or '+'-joined sn, tp, dropotf");
    c.app->add_option("--threshold", o->threshold, "Score threshold, or none");
    c.app->add_option("--repetitions", o->timing.repetitions, "Measured passes per cell");
    c.app->add_option("--warmups", o->timing.warmups, "Unmeasured passes per cell");
    c.app->add_flag("--parallel", o->timing.parallel_cells, "Run cells on pinned threads");
    c.app->add_option("--validity-beams", o->validity_beams,
                      "Beam sizes for the validity curve; empty skips it");
    c.app->add_option("--validity-queries", o->validity_queries, "Queries for the validity curve");
    c.app->add_option("--validity-params", o->validity_params,
                      "Model for the validity curve (default: untrained, from --seed)");
    c.app->add_option("--seed", o->seed, "Seed of the untrained validity model");
    c.app->add_option("--out-dir", o->out_dir, "Output directory")->required();
    c.manifest_dir = [o] { return o->out_dir; };
    c.body = [this, o](RunManifest& m) {
      const auto l = load_vocab_and_trie(o->vocab, o->keywords, err_);
      const auto params = load_params(o->params);
      std::vector<TokenSeq> queries;
      for (const auto& q : read_lines(o->queries)) queries.push_back(l.vocab.encode_text(q));
      std::vector<Strategy> strategies;
      for (const auto& s : split(o->strategies, ',')) strategies.push_back(parse_strategy(s));
      TimingOptions timing = o->timing;
      timing.score_threshold = parse_threshold(o->threshold);
      const auto beams = parse_sizes(o->beams);
      const auto report = run_timing(params, l.trie, queries, beams, strategies, timing);

      fs::create_directories(o->out_dir);
      const auto csv = join_path(o->out_dir, "bench.csv");
      const auto json = join_path(o->out_dir, "bench.json");
      {
        std::ofstream f(csv);
        write_report_csv(f, report);
        std::ofstream g(json);
        write_report_json(g, report);
      }
      for (const auto& r : report.rows)
        out_ << r.strategy << " B=" << r.beam_size << ' ' << r.mean_decode_ms << " ms\n";
      m.inputs = {{"params", o->params}, {"vocab", o->vocab},
                  {"keywords", o->keywords}, {"queries", o->queries}};
      m.outputs = {{"report_csv", csv}, {"report_json", json}};

      const auto vbeams = parse_sizes(o->validity_beams);
      if (vbeams.empty()) return;
      const Parameters vparams = o->validity_params.empty()
                                     ? init_params(params.config(), o->seed)
                                     : load_params(o->validity_params);
      const std::size_t n = std::min(queries.size(), o->validity_queries);
      const auto curve =
          run_validity(vparams, l.trie, std::span(queries).first(n), vbeams);
      const auto vcsv = join_path(o->out_dir, "validity.csv");
      std::ofstream f(vcsv);
      write_validity_csv(f, curve);
      for (const auto& p : curve)
        out_ << "validity B=" << p.beam_size << ' ' << p.validity_fraction
             << " (trie " << p.trie_validity_fraction << ")\n";
      m.outputs.emplace_back("validity_csv", vcsv);
    };
  }

  void add_precompute() {
    auto& c = add("precompute", "Decode frequent logged queries offline into a store");
    auto* o = &pre_;
    c.app->add_option("--query-log", o->query_log, "One request per line")->required()->check(CLI::ExistingFile);
    c.app->add_option("--offline-params", o->params, "Parameter file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--vocab", o->vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--keywords", o->keywords, "Keyword file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--min-count", o->min_count, "Frequency at which a query is precomputed");
    c.app->add_option("--top-fraction", o->top_fraction,
                      "Derive --min-count from the share of distinct queries to cover (0 keeps it)");
    c.app->add_option("--beam", o->beam, "Beam size")->check(CLI::PositiveNumber);
    c.app->add_option("--threshold", o->threshold, "Score threshold, or none");
    c.app->add_option("--out", o->out, "Store file (JSON lines)")->required();
    c.manifest_dir = [o] { return parent_dir(o->out); };
    c.body = [this, o](RunManifest& m) {
      const auto l = load_vocab_and_trie(o->vocab, o->keywords, err_);
      const auto params = load_params(o->params);
      const auto table = build_frequency_table(read_lines(o->query_log));
      const std::uint64_t cutoff =
          o->top_fraction > 0 ? table.threshold_for_top_fraction(o->top_fraction) : o->min_count;
      const auto cfg = beam_from_flags(o->beam, o->threshold, false, false, false, 0);
      PrecomputeReport report;
      const auto store = precompute(table.frequent(cutoff), params, l.vocab, l.trie, cfg, &report);
      write_store_jsonl(o->out, store);
      const auto freq = join_path(parent_dir(o->out), "frequency.tsv");
      write_frequency_tsv(freq, table);
      for (const auto& [q, why] : report.skipped) err_ << "skipped '" << q << "': " << why << '\n';
      out_ << "precomputed " << store.entries.size() << " queries (count >= " << cutoff
           << ", " << table.volume_share(cutoff) * 100.0 << "% of traffic)\n";
      m.inputs = {{"query_log", o->query_log}, {"offline_params", o->params},
                  {"vocab", o->vocab}, {"keywords", o->keywords}};
      m.outputs = {{"store", o->out}, {"frequency", freq}};
    };
  }

  void add_serve() {
    auto& c = add("serve", "Serve JSON-line keyword requests over TCP");
    auto* o = &serve_;
    c.app->add_option("--store", o->store, "Precomputed store")->required()->check(CLI::ExistingFile);
    c.app->add_option("--online-params", o->params, "Parameter file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--vocab", o->vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--keywords", o->keywords, "Keyword file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--host", o->host, "Listen address");
    c.app->add_option("--port", o->port, "Listen port; 0 picks a free one");
    c.app->add_option("--beam", o->beam, "Online beam size")->check(CLI::PositiveNumber);
    c.app->add_option("--threshold", o->threshold, "Score threshold, or none");
    c.app->add_option("--max-requests", o->max_requests, "Stop after this many; 0 runs until killed");
    c.app->add_option("--replay-log", o->replay_log,
                      "Send every line of this file through a client, then stop")
        ->check(CLI::ExistingFile);
    c.app->add_option("--responses-out", o->responses_out, "Where replayed responses go");
    c.manifest_dir = [o] {
      return o->responses_out.empty() ? std::string() : parent_dir(o->responses_out);
    };
    c.body = [this, o](RunManifest& m) {
      const auto l = load_vocab_and_trie(o->vocab, o->keywords, err_);
      const auto params = load_params(o->params);
      RouterConfig rc;
      rc.online_beam = beam_from_flags(o->beam, o->threshold, false, false, false, 0);
      rc.offline_beam = rc.online_beam;
      Router router(read_store_jsonl(o->store), params, l.vocab, l.trie, rc);
      TcpServer server(router, o->host, o->port);
      server.start();
      m.inputs = {{"store", o->store}, {"online_params", o->params},
                  {"vocab", o->vocab}, {"keywords", o->keywords}};
      if (o->replay_log.empty()) {
        out_ << "listening on " << o->host << ':' << server.port() << std::endl;
        server.wait(o->max_requests);
        server.stop();
        return;
      }
      const auto lines = read_lines(o->replay_log);
      std::ofstream responses;
      if (!o->responses_out.empty()) {
        responses.open(o->responses_out);
        if (!responses) throw Error("cannot write " + o->responses_out);
        m.outputs = {{"responses", o->responses_out}};
      }
      {
        LineClient client("127.0.0.1", server.port());
        for (const auto& q : lines) {
          nlohmann::json req;
          req["query"] = q;
          const std::string reply = client.request(req.dump());
          if (responses.is_open()) responses << reply << '\n';
        }
      }
      server.stop();
      const auto k = router.counters();
      ordered_json j;
      j["requests"] = k.requests;
      j["hits"] = k.hits;
      j["misses"] = k.misses;
      j["errors"] = k.errors;
      j["hit_rate"] = k.requests ? static_cast<double>(k.hits) / static_cast<double>(k.requests) : 0.0;
      j["offline_ms"] = k.offline_ms;
      j["online_ms"] = k.online_ms;
      out_ << j.dump() << '\n';
    };
  }

  void add_pipeline() {
    auto& c = add("pipeline",
                  "Run gen-data, build-vocab, train, trie-stats, decode, bench, "
                  "precompute and serve into one directory");
    auto* o = &pipe_;
    c.app->add_option("--out-dir", o->out_dir, "Output directory")->required();
    c.app->add_option("--seed", o->seed, "Data generator seed");
    c.app->add_option("--pairs", o->pairs, "Query-title pairs");
    c.app->add_option("--keywords", o->keywords, "Keyword set size");
    c.app->add_option("--epochs", o->epochs, "Training epochs");
    c.app->add_option("--bench-queries", o->bench_queries, "Benchmark queries");
    c.app->add_option("--bench-repetitions", o->bench_reps, "Measured passes per bench cell");
    c.app->add_option("--beams", o->beams, "Bench beam sizes");
    c.app->add_option("--validity-beams", o->validity_beams, "Validity beam sizes");
    c.app->add_option("--log-draws", o->log_draws, "Requests replayed against the service");
    c.manifest_dir = [o] { return o->out_dir; };
    c.body = [this, o](RunManifest& m) {
      const std::string d = o->out_dir;
      auto p = [&](const char* name) { return join_path(d, name); };
      const std::vector<std::vector<std::string>> steps = {
          {"gen-data", "--seed", std::to_string(o->seed), "--pairs", std::to_string(o->pairs),
           "--keywords", std::to_string(o->keywords), "--queries",
           std::to_string(o->bench_queries), "--log-draws", std::to_string(o->log_draws),
           "--out-dir", d},
          {"build-vocab", "--corpus", p("corpus.tsv"), "--out", p("vocab.txt")},
          {"train", "--corpus", p("corpus.tsv"), "--vocab", p("vocab.txt"), "--epochs",
           std::to_string(o->epochs), "--out", p("model.bin")},
          {"trie-stats", "--keywords", p("keywords.txt"), "--vocab", p("vocab.txt"), "--out",
           p("trie_stats.csv")},
          {"decode", "--params", p("model.bin"), "--vocab", p("vocab.txt"), "--keywords",
           p("keywords.txt"), "--queries-file", p("queries.txt"), "--out", p("decoded.jsonl")},
          {"bench", "--params", p("model.bin"), "--vocab", p("vocab.txt"), "--keywords",
           p("keywords.txt"), "--queries", p("queries.txt"), "--beams", o->beams,
           "--validity-beams", o->validity_beams, "--repetitions",
           std::to_string(o->bench_reps), "--out-dir", p("bench")},
          {"precompute", "--query-log", p("query_log.txt"), "--offline-params", p("model.bin"),
           "--vocab", p("vocab.txt"), "--keywords", p("keywords.txt"), "--out",
           p("store.jsonl")},
          {"serve", "--store", p("store.jsonl"), "--online-params", p("model.bin"), "--vocab",
           p("vocab.txt"), "--keywords", p("keywords.txt"), "--port", "0", "--replay-log",
           p("query_log.txt"), "--responses-out", p("responses.jsonl")},
      };
      for (const auto& step : steps) {
        out_ << "== " << step.front() << std::endl;
        Tool inner(out_, err_);
        if (int rc = inner.run(step); rc != 0)
          throw Error("pipeline step " + step.front() + " failed with exit code " +
                      std::to_string(rc));
        const std::string dir = step.front() == "bench" ? p("bench") : d;
        m.outputs.emplace_back(step.front(), join_path(dir, step.front() + ".manifest.json"));
      }
    };
  }

  void add_replay() {
    auto& c = add("replay", "Rerun the command recorded in a manifest");
    c.app->add_option("manifest", replay_path_, "Manifest file")->required()->check(CLI::ExistingFile);
    c.body = [this](RunManifest&) {
      const RunManifest m = read_manifest(replay_path_);
      Tool inner(out_, err_);
      if (int rc = inner.run(m.to_argv()); rc != 0)
        throw Error("replayed command " + m.command + " failed with exit code " + std::to_string(rc));
    };
  }

  struct GenData {
    SyntheticSpec spec;
    std::size_t queries = 200;
    std::size_t log_distinct = 1000;
    std::size_t log_draws = 5000;
    double zipf = 1.1;
    std::string out_dir;
  };
  struct BuildVocab {
    std::string corpus, out;
    std::size_t max_size = 512;
  };
  struct Train {
    std::string corpus, vocab, out, metrics;
    std::string cell = "gru", attention = "additive";
    bool no_residual = false;
    ModelConfig config;
    TrainHyper hyper = TrainHyper::desk();
  };
  struct TrieStats {
    std::string keywords, vocab, out;
  };
  struct Decode {
    std::string params, vocab, keywords, query, queries_file, out;
    std::size_t beam = 40;
    std::string threshold = "-10";
    bool no_trie = false, no_self_norm = false, no_drop_otf = false;
    std::size_t max_steps = 0;
  };
  struct Bench {
    std::string params, vocab, keywords, queries, out_dir, validity_params;
    std::string beams = "40,60,80,100";
    std::string strategies = "baseline,sn+tp,sn+tp+dropotf";
    std::string threshold = "-8";
    std::string validity_beams = "40,100,200,300";
    std::size_t validity_queries = 50;
    std::uint64_t seed = 99;
    TimingOptions timing;
  };
  struct Precompute {
    std::string query_log, params, vocab, keywords, out;
    std::uint64_t min_count = 2;
    double top_fraction = 0.0;
    std::size_t beam = 40;
    std::string threshold = "-10";
  };
  struct Serve {
    std::string store, params, vocab, keywords, replay_log, responses_out;
    std::string host = "127.0.0.1";
    std::uint16_t port = 7070;
    std::size_t beam = 40;
    std::string threshold = "-10";
    std::uint64_t max_requests = 0;
  };
  struct Pipeline {
    std::string out_dir;
    std::uint64_t seed = 7;
    std::size_t pairs = 20000, keywords = 10000, epochs = 4, bench_queries = 200;
    std::size_t bench_reps = 5, log_draws = 2000;
    std::string beams = "40,60,80,100";
    std::string validity_beams = "40,100,200,300";
  };

  std::ostream& out_;
  std::ostream& err_;
  CLI::App app_{"Generative keyword retrieval: data, training, decoding, serving", "egrm"};
  std::vector<Command> commands_;
  GenData gen_;
  BuildVocab vocab_;
  Train train_;
  TrieStats trie_;
  Decode decode_;
  Bench bench_;
  Precompute pre_;
  Serve serve_;
  Pipeline pipe_;
  std::string replay_path_;
};

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  Tool tool(out, err);
  return tool.run(argv);
}

}  // namespace egrm::cli

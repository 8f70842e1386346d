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

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "egrm/bench.h"
#include "egrm/corpus.h"
#include "egrm/decode.h"
#include "egrm/model.h"
#include "egrm/serve.h"
#include "egrm/trie.h"

namespace py = pybind11;
using namespace egrm;

namespace {

std::vector<RawPair> to_raw(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<RawPair> out;
  out.reserve(pairs.size());
  for (const auto& [s, t] : pairs) out.push_back({s, t});
  return out;
}

py::list results_to_py(const std::vector<DecodeResult>& results) {
  py::list out;
  for (const auto& r : results) {
    py::dict d;
    d["keyword"] = r.keyword;
    d["score"] = r.score;
    d["rank"] = r.rank;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "egrm core bindings";
  m.attr("__version__") = kVersion;
  m.attr("BOS") = kBosId;
  m.attr("EOS") = kEosId;
  m.attr("UNK") = kUnkId;

  py::register_exception<Error>(m, "EgrmError", PyExc_ValueError);

  m.def("tokenize", [](const std::string& text) { return tokenize(text); });
  m.def("normalize_text", [](const std::string& text) { return normalize_text(text); });

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<std::vector<std::string>>(), py::arg("tokens"))
      .def_static("load", &Vocabulary::load)
      .def("save", &Vocabulary::save)
      .def("__len__", &Vocabulary::size)
      .def("id", [](const Vocabulary& v, const std::string& t) { return v.id(t); })
      .def("token", &Vocabulary::token)
      .def("encode", [](const Vocabulary& v, const std::string& text) { return v.encode_text(text); })
      .def("render", [](const Vocabulary& v, const TokenSeq& ids) { return v.render(ids); })
      .def_property_readonly("tokens", &Vocabulary::tokens);

  m.def("build_vocab",
        [](const std::vector<std::pair<std::string, std::string>>& corpus, std::size_t max_size) {
          return build_vocab(to_raw(corpus), max_size);
        },
        py::arg("corpus"), py::arg("max_size") = 512);

  m.def("generate_synthetic",
        [](std::uint64_t seed, std::size_t pairs, std::size_t keywords, double overlap) {
          SyntheticSpec s;
          s.seed = seed;
          s.num_pairs = pairs;
          s.keyword_count = keywords;
          s.overlap_fraction = overlap;
          const auto data = generate_synthetic(s);
          std::vector<std::pair<std::string, std::string>> corpus;
          for (const auto& p : data.corpus) corpus.emplace_back(p.source, p.target);
          return py::make_tuple(corpus, data.keywords);
        },
        py::arg("seed") = 7, py::arg("pairs") = 20000, py::arg("keywords") = 10000,
        py::arg("overlap") = 0.5,
        "Returns (corpus as [(query, title)], keywords).");

  m.def("synthetic_queries",
        [](std::uint64_t seed, std::size_t pairs, std::size_t keywords, std::size_t count,
           std::uint64_t salt) {
          SyntheticSpec s;
          s.seed = seed;
          s.num_pairs = pairs;
          s.keyword_count = keywords;
          return synthetic_queries(s, count, salt);
        },
        py::arg("seed") = 7, py::arg("pairs") = 20000, py::arg("keywords") = 10000,
        py::arg("count") = 200, py::arg("salt") = 1);

  py::class_<KeywordTrie>(m, "KeywordTrie")
      .def_static("build", [](const std::vector<TokenSeq>& kws) { return build_trie(kws); })
      .def_static("from_text",
                  [](const Vocabulary& v, const std::vector<std::string>& kws) {
                    return build_trie(encode_keywords(v, kws));
                  })
      .def("contains", [](const KeywordTrie& t, const TokenSeq& k) { return t.contains(k); })
      .def("valid_suffixes",
           [](const KeywordTrie& t, const TokenSeq& p) { return t.valid_suffixes(p); })
      .def("layer_stats",
           [](const KeywordTrie& t) {
             std::vector<std::pair<std::size_t, double>> out;
             for (const auto& s : t.layer_stats()) out.emplace_back(s.depth, s.avg_suffixes);
             return out;
           })
      .def("enumerate", &KeywordTrie::enumerate)
      .def_property_readonly("keyword_count", &KeywordTrie::keyword_count)
      .def_property_readonly("max_depth", &KeywordTrie::max_depth);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init([](std::uint32_t vocab_size, const std::string& cell,
                       const std::string& attention, std::uint32_t encoder_layers,
                       std::uint32_t decoder_layers, std::uint32_t embed_dim,
                       std::uint32_t hidden_dim) {
             ModelConfig c;
             c.vocab_size = vocab_size;
             c.cell = parse_cell_type(cell);
             c.attention = parse_attention_kind(attention);
             c.encoder_layers = encoder_layers;
             c.decoder_layers = decoder_layers;
             c.embed_dim = embed_dim;
             c.hidden_dim = hidden_dim;
             c.validate();
             return c;
           }),
           py::arg("vocab_size"), py::arg("cell") = "gru", py::arg("attention") = "additive",
           py::arg("encoder_layers") = 1, py::arg("decoder_layers") = 1,
           py::arg("embed_dim") = 32, py::arg("hidden_dim") = 64)
      .def_readonly("vocab_size", &ModelConfig::vocab_size)
      .def_readonly("embed_dim", &ModelConfig::embed_dim)
      .def_readonly("hidden_dim", &ModelConfig::hidden_dim)
      .def_property_readonly("cell", [](const ModelConfig& c) { return to_string(c.cell); })
      .def_property_readonly("attention",
                             [](const ModelConfig& c) { return to_string(c.attention); });

  py::class_<Parameters>(m, "Parameters")
      .def_static("load", &load_params)
      .def("save", [](const Parameters& p, const std::string& path) { save_params(p, path); })
      .def("__len__", &Parameters::size)
      .def_property_readonly("config", &Parameters::config)
      .def_property_readonly("tag", [](const Parameters& p) { return params_tag(p); });

  m.def("init_params", &init_params, py::arg("config"), py::arg("seed") = 1);

  m.def("sequence_logprob",
        [](const Parameters& p, const TokenSeq& source, const TokenSeq& target) {
          return sequence_logprob(p, source, target);
        });

  m.def("train",
        [](const Vocabulary& vocab,
           const std::vector<std::pair<std::string, std::string>>& corpus,
           const ModelConfig& config, std::size_t epochs, std::size_t batch_size,
           double learning_rate, double lr_decay, double beta, std::uint64_t seed,
           const std::function<void(std::size_t, double, double)>& on_epoch) {
          TrainHyper h = TrainHyper::desk();
          h.epochs = epochs;
          h.batch_size = batch_size;
          h.learning_rate = learning_rate;
          h.lr_decay = lr_decay;
          h.beta = beta;
          h.seed = seed;
          const auto pairs = encode_corpus(vocab, to_raw(corpus));
          std::optional<TrainResult> trained;
          {
            py::gil_scoped_release release;
            trained.emplace(train(pairs, config, h, [&](const EpochMetrics& e) {
              if (!on_epoch) return;
              py::gil_scoped_acquire acquire;
              on_epoch(e.epoch, e.loss, e.mean_abs_log_z);
            }));
          }
          TrainResult& r = *trained;
          std::vector<std::tuple<std::size_t, double, double>> metrics;
          for (const auto& e : r.metrics) metrics.emplace_back(e.epoch, e.loss, e.mean_abs_log_z);
          return py::make_tuple(std::move(r.params), metrics);
        },
        py::arg("vocab"), py::arg("corpus"), py::arg("config"), py::arg("epochs") = 4,
        py::arg("batch_size") = 32, py::arg("learning_rate") = 2e-3, py::arg("lr_decay") = 0.8,
        py::arg("beta") = 0.1, py::arg("seed") = 1, py::arg("on_epoch") = nullptr,
        "Returns (params, [(epoch, loss, mean_abs_logZ)]).");

  m.def("beam_search",
        [](const Parameters& p, const TokenSeq& query, const KeywordTrie* trie,
           std::size_t beam, std::optional<double> threshold, bool use_trie, bool self_norm,
           bool drop_otf, std::size_t max_steps) {
          BeamConfig c;
          c.beam_size = beam;
          c.score_threshold = threshold.value_or(kNoThreshold);
          c.use_trie = use_trie;
          c.use_self_norm = self_norm;
          c.use_drop_otf = drop_otf;
          c.max_steps = max_steps;
          DecodeStats stats;
          std::vector<DecodeResult> out;
          {
            py::gil_scoped_release release;
            out = beam_search(p, query, trie, c, &stats);
          }
          return py::make_tuple(results_to_py(out), stats.score_evaluations);
        },
        py::arg("params"), py::arg("query"), py::arg("trie"), py::arg("beam") = 40,
        py::arg("threshold") = py::none(), py::arg("use_trie") = true,
        py::arg("self_norm") = true, py::arg("drop_otf") = true, py::arg("max_steps") = 0,
        "Returns ([{keyword, score, rank}], score_evaluations).");

  m.def("validity_fraction",
        [](const std::vector<TokenSeq>& keywords, const KeywordTrie& trie) {
          std::vector<DecodeResult> rs;
          for (const auto& k : keywords) rs.push_back({k, 0.0, 0});
          return validity_fraction(rs, trie);
        });
}

# Copyright 2026 The EGRM Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Generative keyword retrieval: seq2seq model, trie-constrained decoding."""

from egrm._core import (
    BOS,
    EOS,
    UNK,
    EgrmError,
    KeywordTrie,
    ModelConfig,
    Parameters,
    Vocabulary,
    __version__,
    beam_search,
    build_vocab,
    generate_synthetic,
    init_params,
    normalize_text,
    sequence_logprob,
    synthetic_queries,
    tokenize,
    train,
    validity_fraction,
)


def decode_text(params, vocab, trie, query, **kwargs):
    """Decodes a query string; returns [(keyword text, score)]."""
    results, _ = beam_search(params, vocab.encode(query), trie, **kwargs)
    return [(vocab.render(r["keyword"]), r["score"]) for r in results]


__all__ = [
    "BOS",
    "EOS",
    "UNK",
    "EgrmError",
    "KeywordTrie",
    "ModelConfig",
    "Parameters",
    "Vocabulary",
    "__version__",
    "beam_search",
    "build_vocab",
    "decode_text",
    "generate_synthetic",
    "init_params",
    "normalize_text",
    "sequence_logprob",
    "synthetic_queries",
    "tokenize",
    "train",
    "validity_fraction",
]

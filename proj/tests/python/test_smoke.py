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

import itertools
import math

import pytest

import egrm


@pytest.fixture(scope="module")
def small():
    corpus, keywords = egrm.generate_synthetic(seed=3, pairs=400, keywords=200)
    vocab = egrm.build_vocab(corpus)
    trie = egrm.KeywordTrie.from_text(vocab, keywords)
    return corpus, keywords, vocab, trie


def test_version_and_reserved_ids():
    assert egrm.__version__ == "0.3.1"
    assert (egrm.BOS, egrm.EOS, egrm.UNK) == (0, 1, 2)


def test_tokenize_and_vocab(small):
    _, _, vocab, _ = small
    assert egrm.tokenize("Red  Shoes") == ["red", "shoes"]
    assert vocab.token(egrm.EOS) == "<e>"
    assert vocab.encode("zzzz-not-a-word") == [egrm.UNK]


def test_trie_layer_stats(small):
    _, _, _, trie = small
    stats = trie.layer_stats()
    assert stats[0][0] == 0
    assert stats[0][1] > stats[-1][1]
    assert trie.keyword_count == len(trie.enumerate())


def test_fixture_trie():
    trie = egrm.KeywordTrie.build([[3, 4], [3, 5], [6, 4]])
    assert trie.contains([3, 5])
    assert not trie.contains([3])
    assert sorted(trie.valid_suffixes([3])) == [4, 5]
    assert egrm.validity_fraction([[3, 4], [4, 4]], trie) == 0.5


def test_beam_search_closed_set_and_exact_scores():
    trie = egrm.KeywordTrie.build([[3, 4], [3, 5], [6, 4], [5]])
    config = egrm.ModelConfig(vocab_size=8, embed_dim=4, hidden_dim=6)
    params = egrm.init_params(config, seed=5)
    results, evals = egrm.beam_search(params, [3, 6], trie, beam=4, self_norm=False,
                                      drop_otf=False)
    assert len(results) == 4 and evals > 0
    for r in results:
        assert trie.contains(r["keyword"])
        assert math.isclose(r["score"], egrm.sequence_logprob(params, [3, 6], r["keyword"]),
                            abs_tol=1e-9)
    scores = [r["score"] for r in results]
    assert scores == sorted(scores, reverse=True)


def test_train_and_decode(small, tmp_path):
    corpus, keywords, vocab, trie = small
    config = egrm.ModelConfig(vocab_size=len(vocab), embed_dim=8, hidden_dim=12)
    seen = []
    params, metrics = egrm.train(vocab, corpus, config, epochs=2,
                                 on_epoch=lambda *m: seen.append(m))
    assert [m[0] for m in metrics] == [1, 2]
    assert seen == metrics
    path = str(tmp_path / "model.bin")
    params.save(path)
    again = egrm.Parameters.load(path)
    assert again.tag == params.tag
    hits = egrm.decode_text(again, vocab, trie, corpus[0][0], beam=5)
    assert hits
    texts = {egrm.normalize_text(k) for k in keywords}
    assert all(k in texts for k, _ in hits)


def test_errors_map_to_value_error():
    with pytest.raises(ValueError):
        egrm.ModelConfig(vocab_size=8, cell="rnn")
    trie = egrm.KeywordTrie.build([[3, 4]])
    params = egrm.init_params(egrm.ModelConfig(vocab_size=8, embed_dim=4, hidden_dim=6))
    with pytest.raises(ValueError):
        egrm.beam_search(params, [], trie)

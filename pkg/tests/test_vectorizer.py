import math
import random

import numpy as np
import pytest

from textcausal.vectorizer import (
    VectorizerConfig,
    Vocabulary,
    fit_vocabulary,
    tokenize,
    transform,
    transform_corpus,
)


def brute_force_tfidf(doc, corpus, min_df=1, max_features=None, l2=True):
    """Independent reference implementation, written from the formula only."""

    def toks(s):
        out, cur = [], []
        for ch in s.lower():
            if ch.isascii() and (ch.isdigit() or "a" <= ch <= "z"):
                cur.append(ch)
            elif cur:
                out.append("".join(cur))
                cur = []
        if cur:
            out.append("".join(cur))
        return out

    df = {}
    for d in corpus:
        for t in set(toks(d)):
            df[t] = df.get(t, 0) + 1
    kept = [t for t in df if df[t] >= min_df]
    if max_features is not None and len(kept) > max_features:
        kept.sort(key=lambda t: (-df[t], t))
        kept = kept[:max_features]
    kept.sort()
    index = {t: i for i, t in enumerate(kept)}
    n = len(corpus)
    counts = {}
    for t in toks(doc):
        if t in index:
            counts[t] = counts.get(t, 0) + 1
    vec = {}
    for t, tf in counts.items():
        idf = math.log((1 + n) / (1 + df[t])) + 1.0
        vec[index[t]] = tf * idf
    if l2 and vec:
        norm = math.sqrt(sum(w * w for w in vec.values()))
        vec = {i: w / norm for i, w in vec.items()}
    return sorted(vec.items())


def test_tokenize_alphanumeric_runs():
    assert tokenize("Hello, world! 2nd try") == ["hello", "world", "2nd", "try"]
    assert tokenize("ABC", lowercase=False) == ["ABC"]
    assert tokenize("...") == []


def test_fit_vocabulary_min_df():
    v = fit_vocabulary(["a b", "a c"], VectorizerConfig(min_df=1))
    assert set(v.term_index) == {"a", "b", "c"}
    assert v.document_frequency == {"a": 2, "b": 1, "c": 1}
    v2 = fit_vocabulary(["a b", "a c"], VectorizerConfig(min_df=2))
    assert set(v2.term_index) == {"a"}


def test_fit_vocabulary_max_features_keeps_highest_df():
    v = fit_vocabulary(["a b", "a c"], VectorizerConfig(min_df=1, max_features=1))
    assert set(v.term_index) == {"a"}


def test_index_order_is_lexicographic_and_dense():
    v = fit_vocabulary(["zeta alpha mid", "zeta alpha mid"], VectorizerConfig(min_df=1))
    names = sorted(v.term_index, key=v.term_index.get)
    assert names == sorted(names)
    assert sorted(v.term_index.values()) == list(range(len(v)))


def test_idf_is_one_for_ubiquitous_term():
    v = fit_vocabulary(["a b", "a c", "a d"], VectorizerConfig(min_df=1))
    assert v.idf("a") == pytest.approx(1.0, abs=1e-15)


def test_transform_frozen_example():
    # doc "good product good" over {"good product good", "bad product"}
    v = fit_vocabulary(["good product good", "bad product"], VectorizerConfig(min_df=1))
    pairs = transform("good product good", v)
    assert [i for i, _ in pairs] == [v.term_index["good"], v.term_index["product"]]
    raw_good = 2 * (math.log(3 / 2) + 1)
    norm = math.sqrt(raw_good**2 + 1.0)
    assert pairs[0][1] == pytest.approx(raw_good / norm, abs=1e-12)
    assert pairs[1][1] == pytest.approx(1.0 / norm, abs=1e-12)
    # frozen values, computed by hand from the formula
    assert pairs[0][1] == pytest.approx(0.9421556246632359, abs=1e-15)
    assert pairs[1][1] == pytest.approx(0.33517574332792605, abs=1e-15)


def test_transform_oov_only_is_empty():
    v = fit_vocabulary(["a b", "a b"], VectorizerConfig(min_df=1))
    assert transform("zzz qqq", v) == []
    assert transform("", v) == []


def test_l2_norm_is_unit():
    v = fit_vocabulary(["x y z", "x y", "x"], VectorizerConfig(min_df=1))
    pairs = transform("x y z z", v)
    assert math.sqrt(sum(w * w for _, w in pairs)) == pytest.approx(1.0, abs=1e-9)


def test_matches_brute_force_oracle_on_random_corpora():
    rnd = random.Random(7)
    words = [f"w{k}" for k in range(40)]
    for trial in range(5):
        corpus = [
            " ".join(rnd.choices(words, k=rnd.randint(1, 15))) for _ in range(50)
        ]
        for min_df, max_features in ((1, None), (2, None), (1, 10)):
            v = fit_vocabulary(
                corpus, VectorizerConfig(min_df=min_df, max_features=max_features)
            )
            for doc in corpus[:10]:
                got = transform(doc, v)
                want = brute_force_tfidf(doc, corpus, min_df, max_features)
                assert len(got) == len(want)
                for (gi, gw), (wi, ww) in zip(got, want):
                    assert gi == wi
                    assert abs(gw - ww) <= 1e-12


def test_fit_is_corpus_order_invariant():
    corpus = ["a b c", "b c d", "c d e", "a e"]
    v1 = fit_vocabulary(corpus, VectorizerConfig(min_df=1))
    v2 = fit_vocabulary(corpus[::-1], VectorizerConfig(min_df=1))
    assert v1.term_index == v2.term_index
    assert v1.document_frequency == v2.document_frequency


def test_bigrams():
    v = fit_vocabulary(["red car", "red car wash"], VectorizerConfig(min_df=1, ngram_max=2))
    assert "red car" in v.term_index
    assert v.document_frequency["red car"] == 2
    pairs = transform("red car", v)
    assert v.term_index["red car"] in [i for i, _ in pairs]


def test_transform_corpus_csr_shape_and_rows():
    corpus = ["a b", "b c", ""]
    v = fit_vocabulary(corpus, VectorizerConfig(min_df=1))
    M = transform_corpus(corpus, v)
    assert M.shape == (3, len(v))
    row0 = {i: w for i, w in zip(M.indices[M.indptr[0]:M.indptr[1]], M.data[M.indptr[0]:M.indptr[1]])}
    assert row0 == dict(transform("a b", v))
    assert M.indptr[2] == M.indptr[3]  # empty doc -> empty row


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        fit_vocabulary([], VectorizerConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        VectorizerConfig(min_df=0)
    with pytest.raises(ValueError):
        VectorizerConfig(max_features=0)
    with pytest.raises(ValueError):
        VectorizerConfig(ngram_max=3)


def test_vocabulary_save_load_round_trip(tmp_path):
    v = fit_vocabulary(
        ["good product good", "bad product"],
        VectorizerConfig(min_df=1, max_features=100, l2_normalize=False),
    )
    path = str(tmp_path / "vocab.tsv")
    v.save(path)
    v2 = Vocabulary.load(path)
    assert v2.term_index == v.term_index
    assert v2.document_frequency == v.document_frequency
    assert v2.n_docs == v.n_docs
    assert v2.config == v.config
    assert transform("good product", v2) == transform("good product", v)


def test_feature_names_are_prefixed_and_indexed():
    v = fit_vocabulary(["a b", "a b"], VectorizerConfig(min_df=1))
    names = v.feature_names()
    assert names[v.term_index["a"]] == "tfidf:a"
    assert len(names) == len(v)

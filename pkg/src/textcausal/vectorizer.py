"""Sparse TF-IDF vectorization of raw text columns.

Text enters the causal models as a block of TF-IDF features appended to
the conventional covariates.  The variant here uses smoothed idf,
``ln((1 + n_docs) / (1 + df)) + 1``, with raw term counts and optional L2
normalization, so weights stay bounded for downstream tree learners.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

_TOKEN_RE = re.compile(r"[0-9a-zA-Z]+")


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Split text into maximal alphanumeric runs."""
    if lowercase:
        text = text.lower()
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class VectorizerConfig:
    lowercase: bool = True
    min_df: int = 2
    max_features: int | None = 20000
    ngram_max: int = 1
    l2_normalize: bool = True

    def __post_init__(self):
        if self.min_df < 1:
            raise ValueError("min_df must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1 if set")
        if self.ngram_max not in (1, 2):
            raise ValueError("ngram_max must be 1 or 2")


@dataclass
class Vocabulary:
    """Fitted term index with document frequencies."""

    term_index: dict[str, int]
    document_frequency: dict[str, int]
    n_docs: int
    config: VectorizerConfig = field(default_factory=VectorizerConfig)

    def __len__(self) -> int:
        return len(self.term_index)

    def idf(self, term: str) -> float:
        df = self.document_frequency[term]
        return math.log((1.0 + self.n_docs) / (1.0 + df)) + 1.0

    def feature_names(self) -> list[str]:
        names = [""] * len(self.term_index)
        for term, idx in self.term_index.items():
            names[idx] = f"tfidf:{term}"
        return names

    def save(self, path: str) -> None:
        cfg = self.config
        with open(path, "w", encoding="utf-8") as f:
            f.write(
                f"#vocab\tn_docs={self.n_docs}\tlowercase={int(cfg.lowercase)}"
                f"\tmin_df={cfg.min_df}\tmax_features={cfg.max_features}"
                f"\tngram_max={cfg.ngram_max}\tl2_normalize={int(cfg.l2_normalize)}\n"
            )
            for term in sorted(self.term_index, key=self.term_index.get):
                f.write(f"{term}\t{self.term_index[term]}\t{self.document_frequency[term]}\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            header = f.readline().rstrip("\n")
            if not header.startswith("#vocab"):
                raise ValueError(f"not a vocabulary file: {path}")
            kv = dict(part.split("=", 1) for part in header.split("\t")[1:])
            config = VectorizerConfig(
                lowercase=bool(int(kv["lowercase"])),
                min_df=int(kv["min_df"]),
                max_features=None if kv["max_features"] == "None" else int(kv["max_features"]),
                ngram_max=int(kv["ngram_max"]),
                l2_normalize=bool(int(kv["l2_normalize"])),
            )
            term_index: dict[str, int] = {}
            document_frequency: dict[str, int] = {}
            for line in f:
                term, idx, df = line.rstrip("\n").split("\t")
                term_index[term] = int(idx)
                document_frequency[term] = int(df)
        return cls(term_index, document_frequency, int(kv["n_docs"]), config)


def _terms(doc: str, config: VectorizerConfig) -> list[str]:
    toks = tokenize(doc, lowercase=config.lowercase)
    if config.ngram_max == 1:
        return toks
    return toks + [f"{a} {b}" for a, b in zip(toks, toks[1:])]


def fit_vocabulary(corpus, config: VectorizerConfig | None = None) -> Vocabulary:
    """Build a Vocabulary from a sequence of documents.

    Terms with document frequency below ``min_df`` are dropped; the rest
    are truncated to ``max_features`` by (df desc, term asc) and indexed
    lexicographically.
    """
    config = config or VectorizerConfig()
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    df: dict[str, int] = {}
    for doc in corpus:
        for term in set(_terms(doc, config)):
            df[term] = df.get(term, 0) + 1
    kept = [t for t, c in df.items() if c >= config.min_df]
    if config.max_features is not None and len(kept) > config.max_features:
        kept.sort(key=lambda t: (-df[t], t))
        kept = kept[: config.max_features]
    kept.sort()
    term_index = {t: i for i, t in enumerate(kept)}
    return Vocabulary(term_index, {t: df[t] for t in kept}, len(corpus), config)


def transform(doc: str, vocab: Vocabulary) -> list[tuple[int, float]]:
    """TF-IDF weights of one document as sorted (index, weight) pairs."""
    counts: dict[int, int] = {}
    for term in _terms(doc, vocab.config):
        idx = vocab.term_index.get(term)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return []
    idf_by_idx = {}
    for term, idx in vocab.term_index.items():
        if idx in counts:
            idf_by_idx[idx] = vocab.idf(term)
    pairs = [(idx, counts[idx] * idf_by_idx[idx]) for idx in sorted(counts)]
    if vocab.config.l2_normalize:
        norm = math.sqrt(sum(w * w for _, w in pairs))
        if norm > 0:
            pairs = [(i, w / norm) for i, w in pairs]
    return pairs


def transform_corpus(corpus, vocab: Vocabulary) -> sparse.csr_matrix:
    """Vectorize a sequence of documents into a CSR matrix of width |V|."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in corpus:
        for idx, w in transform(doc, vocab):
            indices.append(idx)
            data.append(w)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int32), indptr),
        shape=(len(indptr) - 1, len(vocab)),
    )

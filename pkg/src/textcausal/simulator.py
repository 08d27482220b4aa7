"""Semi-synthetic generator of text-confounded datasets with exact truth.

Rows carry a binary confounder C (product type), a hidden binary
treatment T (review sentiment), a synthetic review text whose token
distribution depends on (T, C) so that T is recoverable from text, and a
simulated binary outcome Y.  The ground-truth ATE is available in closed
form, which is what makes the Table-2-style benchmark possible.

An optional heterogeneity marker boosts the treated-outcome probability
for rows whose text contains a chosen token; the marker's emission rate
must not depend on T so the boosted truth stays analytic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .tabular import Column, ColumnKind, Table
from .vectorizer import tokenize

CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))  # (t, c) in fixed order


@dataclass
class TextModel:
    vocab: list[str]
    weights: dict[str, list[float]]  # "t,c" -> per-token emission weight
    doc_len_mean: float = 20.0

    def probs(self, t: int, c: int) -> np.ndarray:
        w = np.asarray(self.weights[f"{t},{c}"], dtype=np.float64)
        if len(w) != len(self.vocab) or (w < 0).any() or w.sum() <= 0:
            raise ValueError(f"invalid emission weights for cell ({t},{c})")
        return w / w.sum()

    def token_prob(self, token: str, t: int, c: int) -> float:
        try:
            idx = self.vocab.index(token)
        except ValueError:
            return 0.0
        return float(self.probs(t, c)[idx])


@dataclass
class SimulationSpec:
    n: int
    p_c: float
    p_t_given_c: tuple[float, float]  # (P(T=1|C=0), P(T=1|C=1))
    p_y: tuple[tuple[float, float], tuple[float, float]]  # p_y[t][c]
    text_model: TextModel
    marker: tuple[str, float] | None = None  # (token, boost on P(Y=1|T=1,C))
    corpus_pools: dict[str, list[str]] | None = None  # "t,c" -> real texts
    seed: int = 0

    def __post_init__(self):
        probs = [self.p_c, *self.p_t_given_c, *self.p_y[0], *self.p_y[1]]
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise ValueError("all probabilities must lie in [0, 1]")
        if not self.text_model.vocab:
            raise ValueError("vocabulary must be non-empty")
        if self.marker is not None:
            token, boost = self.marker
            for c in (0, 1):
                if self.p_y[1][c] + boost > 1.0 + 1e-12:
                    raise ValueError(f"boosted cell P(Y=1|T=1,C={c}) exceeds 1")
                p0 = self.text_model.token_prob(token, 0, c)
                p1 = self.text_model.token_prob(token, 1, c)
                if abs(p0 - p1) > 1e-12:
                    raise ValueError(
                        "marker token emission must not depend on the treatment"
                    )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_t_given_c"] = list(self.p_t_given_c)
        d["p_y"] = [list(self.p_y[0]), list(self.p_y[1])]
        d["marker"] = None if self.marker is None else [self.marker[0], self.marker[1]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationSpec":
        tm = d["text_model"]
        return cls(
            n=d["n"],
            p_c=d["p_c"],
            p_t_given_c=tuple(d["p_t_given_c"]),
            p_y=(tuple(d["p_y"][0]), tuple(d["p_y"][1])),
            text_model=TextModel(
                vocab=list(tm["vocab"]),
                weights={k: list(v) for k, v in tm["weights"].items()},
                doc_len_mean=tm.get("doc_len_mean", 20.0),
            ),
            marker=None if d.get("marker") is None else (d["marker"][0], float(d["marker"][1])),
            corpus_pools=d.get("corpus_pools"),
            seed=d.get("seed", 0),
        )

    @classmethod
    def load(cls, path: str) -> "SimulationSpec":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)


@dataclass
class OracleTruth:
    ate_true: float
    cate_marked: float | None
    cate_unmarked: float | None
    p_marked: float | None
    cell_probs: dict[str, float]
    naive_expected: float

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, sort_keys=True)


def _marker_prob_by_c(spec: SimulationSpec) -> tuple[float, float]:
    """P(text contains the marker token | C=c); Poisson doc length makes it
    1 - exp(-doc_len_mean * p_token)."""
    token, _ = spec.marker
    lam = spec.text_model.doc_len_mean
    return tuple(
        1.0 - math.exp(-lam * spec.text_model.token_prob(token, 1, c)) for c in (0, 1)
    )


def oracle_ate(spec: SimulationSpec) -> float:
    """Closed-form ATE; marker boost integrated analytically."""
    base = sum(
        pc * (spec.p_y[1][c] - spec.p_y[0][c])
        for c, pc in ((0, 1 - spec.p_c), (1, spec.p_c))
    )
    if spec.marker is None:
        return base
    _, boost = spec.marker
    m0, m1 = _marker_prob_by_c(spec)
    return base + boost * ((1 - spec.p_c) * m0 + spec.p_c * m1)


def oracle_truth(spec: SimulationSpec) -> OracleTruth:
    cell_probs = {}
    for t, c in CELLS:
        pc = spec.p_c if c == 1 else 1 - spec.p_c
        pt = spec.p_t_given_c[c] if t == 1 else 1 - spec.p_t_given_c[c]
        cell_probs[f"t={t},c={c}"] = pc * pt
    # expected naive difference-in-means over the joint distribution
    boost = spec.marker[1] if spec.marker is not None else 0.0
    m = _marker_prob_by_c(spec) if spec.marker is not None else (0.0, 0.0)
    p1 = sum(
        cell_probs[f"t=1,c={c}"] * (spec.p_y[1][c] + boost * m[c]) for c in (0, 1)
    ) / sum(cell_probs[f"t=1,c={c}"] for c in (0, 1))
    p0 = sum(cell_probs[f"t=0,c={c}"] * spec.p_y[0][c] for c in (0, 1)) / sum(
        cell_probs[f"t=0,c={c}"] for c in (0, 1)
    )
    cate_marked = cate_unmarked = p_marked = None
    if spec.marker is not None:
        pm = (1 - spec.p_c) * m[0] + spec.p_c * m[1]
        base = {c: spec.p_y[1][c] - spec.p_y[0][c] for c in (0, 1)}
        cate_marked = (
            sum((spec.p_c if c else 1 - spec.p_c) * m[c] * (base[c] + boost) for c in (0, 1)) / pm
        )
        cate_unmarked = (
            sum((spec.p_c if c else 1 - spec.p_c) * (1 - m[c]) * base[c] for c in (0, 1))
            / (1 - pm)
        )
        p_marked = pm
    return OracleTruth(
        ate_true=oracle_ate(spec),
        cate_marked=cate_marked,
        cate_unmarked=cate_unmarked,
        p_marked=p_marked,
        cell_probs=cell_probs,
        naive_expected=p1 - p0,
    )


def simulate(spec: SimulationSpec) -> tuple[Table, OracleTruth]:
    """Generate n rows (C_true, T_true, text, Y_sim); deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    c = (rng.random(n) < spec.p_c).astype(int)
    pt = np.where(c == 1, spec.p_t_given_c[1], spec.p_t_given_c[0])
    t = (rng.random(n) < pt).astype(int)
    texts: list[str] = [""] * n
    if spec.corpus_pools is not None:
        for tt, cc in CELLS:
            idx = np.flatnonzero((t == tt) & (c == cc))
            if len(idx) == 0:
                continue
            pool = spec.corpus_pools.get(f"{tt},{cc}", [])
            if not pool:
                raise ValueError(f"empty corpus pool for cell ({tt},{cc})")
            if len(idx) > len(pool):
                raise ValueError(
                    f"corpus pool for cell ({tt},{cc}) has {len(pool)} texts, need {len(idx)}"
                )
            picks = rng.permutation(len(pool))[: len(idx)]
            for i, k in zip(idx, picks):
                texts[i] = pool[k]
    else:
        lengths = rng.poisson(spec.text_model.doc_len_mean, size=n)
        vocab = np.asarray(spec.text_model.vocab, dtype=object)
        for tt, cc in CELLS:
            idx = np.flatnonzero((t == tt) & (c == cc))
            if len(idx) == 0:
                continue
            probs = spec.text_model.probs(tt, cc)
            total = int(lengths[idx].sum())
            toks = rng.choice(len(vocab), size=total, p=probs)
            bounds = np.concatenate(([0], np.cumsum(lengths[idx])))
            for k, i in enumerate(idx):
                texts[i] = " ".join(vocab[toks[bounds[k] : bounds[k + 1]]])
    p_vec = np.where(t == 1, np.asarray(spec.p_y[1])[c], np.asarray(spec.p_y[0])[c]).astype(
        np.float64
    )
    if spec.marker is not None:
        token, boost = spec.marker
        marked = np.array([token in tokenize(s) for s in texts])
        p_vec = p_vec + boost * marked * (t == 1)
    y = (rng.random(n) < p_vec).astype(int)
    table = Table(
        [
            Column("C_true", ColumnKind.BINARY, c.tolist()),
            Column("T_true", ColumnKind.BINARY, t.tolist()),
            Column("text", ColumnKind.TEXT, texts),
            Column("Y_sim", ColumnKind.BINARY, y.tolist()),
        ]
    )
    return table, oracle_truth(spec)


def inject_corpus(spec: SimulationSpec, pool: dict[str, list[str]]) -> SimulationSpec:
    """Swap synthetic emission for sampling real texts per (T, C) cell.

    Keys are "t,c" strings.  Truth formulas are unchanged: the outcome
    model never looks at the text except through the marker token.
    """
    for t, c in CELLS:
        if not pool.get(f"{t},{c}"):
            raise ValueError(f"corpus pool missing or empty for cell ({t},{c})")
    return SimulationSpec(
        n=spec.n,
        p_c=spec.p_c,
        p_t_given_c=spec.p_t_given_c,
        p_y=spec.p_y,
        text_model=spec.text_model,
        marker=spec.marker,
        corpus_pools={k: list(v) for k, v in pool.items()},
        seed=spec.seed,
    )


# --------------------------------------------------------------- reference

POSITIVE_TOKENS = [
    "good", "great", "excellent", "wonderful", "amazing", "love", "best",
    "fantastic", "perfect", "awesome", "happy", "nice", "pleased", "superb",
    "delightful", "enjoyed", "recommend", "satisfied", "impressive", "solid",
]
NEGATIVE_TOKENS = [
    "bad", "terrible", "awful", "horrible", "worst", "hate", "poor",
    "disappointing", "disappointed", "broken", "useless", "waste", "cheap",
    "flimsy", "defective", "refund", "annoying", "frustrating", "garbage", "junk",
]
BABY_TOKENS = ["toddler", "stroller", "diaper", "crib", "pacifier", "bib"]
MUSIC_TOKENS = ["guitar", "amp", "chord", "pedal", "strings", "fret"]
NEUTRAL_TOKENS = ["product", "box", "color", "size", "order", "arrived", "day", "week"]

SIGNAL_ODDS = 3.0  # favored-group emission odds vs the disfavored group


def default_text_model(doc_len_mean: float = 20.0) -> TextModel:
    vocab = POSITIVE_TOKENS + NEGATIVE_TOKENS + BABY_TOKENS + MUSIC_TOKENS + NEUTRAL_TOKENS
    weights = {}
    for t, c in CELLS:
        w = []
        for tok in vocab:
            if tok in POSITIVE_TOKENS:
                w.append(SIGNAL_ODDS if t == 1 else 1.0)
            elif tok in NEGATIVE_TOKENS:
                w.append(SIGNAL_ODDS if t == 0 else 1.0)
            elif tok in BABY_TOKENS:
                w.append(SIGNAL_ODDS if c == 1 else 1.0)
            elif tok in MUSIC_TOKENS:
                w.append(SIGNAL_ODDS if c == 0 else 1.0)
            else:
                w.append(1.0)
        weights[f"{t},{c}"] = w
    return TextModel(vocab=vocab, weights=weights, doc_len_mean=doc_len_mean)


def reference_spec(
    n: int = 5000,
    seed: int = 0,
    confounded: bool = True,
    marker: tuple[str, float] | None = None,
) -> SimulationSpec:
    """The benchmark setting: true ATE 0.20 and, when confounded,
    an expected naive difference-in-means of 0.44."""
    return SimulationSpec(
        n=n,
        p_c=0.5,
        p_t_given_c=(0.2, 0.8) if confounded else (0.5, 0.5),
        p_y=((0.2, 0.6), (0.4, 0.8)),
        text_model=default_text_model(),
        marker=marker,
        seed=seed,
    )

"""Derive treatment/outcome/covariate columns from raw text.

The default scorers are lexicon and keyword based: deterministic, fast,
and dependency free.  Anything smarter (a fine-tuned classifier, an API
call) plugs in through the Scorer interface via ``code_callable``.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

from .tabular import ColumnKind, SchemaError, Table
from .vectorizer import tokenize


class ScoringError(ValueError):
    pass


class Scorer:
    """Scoring interface: text -> {column name: score in [0, 1]}.

    Subclasses declare ``output_columns`` and implement ``score``.
    Returned keys must be a subset of the declared columns.
    """

    output_columns: list[str] = []

    def score(self, text: str) -> dict[str, float]:
        raise NotImplementedError


@dataclass
class Lexicon:
    """Per-label weighted term sets, e.g. positive/negative word lists."""

    weights: dict[str, dict[str, float]]  # label -> term -> weight

    def __post_init__(self):
        for label, terms in self.weights.items():
            for term, w in terms.items():
                if term != term.lower():
                    raise ValueError(f"lexicon term {term!r} under {label!r} is not lowercase")
                if not w > 0:
                    raise ValueError(f"lexicon weight for {term!r} must be > 0")

    @property
    def labels(self) -> list[str]:
        return list(self.weights)

    def hits(self, text: str) -> dict[str, float]:
        """Total matched weight per label for one document."""
        totals = dict.fromkeys(self.weights, 0.0)
        for tok in tokenize(text):
            for label, terms in self.weights.items():
                w = terms.get(tok)
                if w is not None:
                    totals[label] += w
        return totals

    @classmethod
    def load(cls, path: str) -> "Lexicon":
        with open(path, encoding="utf-8") as f:
            return cls._parse(f.read(), path)

    @classmethod
    def builtin(cls, name: str) -> "Lexicon":
        text = (
            importlib.resources.files("textcausal.data").joinpath(f"{name}.lex").read_text("utf-8")
        )
        return cls._parse(text, f"builtin:{name}")

    @classmethod
    def _parse(cls, text: str, source: str) -> "Lexicon":
        weights: dict[str, dict[str, float]] = {}
        label = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                label = line[1:-1]
                weights.setdefault(label, {})
                continue
            if label is None:
                raise ValueError(f"{source}:{lineno}: term before any [label] header")
            term, _, w = line.partition("\t")
            weights[label][term] = float(w) if w else 1.0
        return cls(weights)


class LexiconScorer(Scorer):
    """Laplace-smoothed share of matched lexicon weight per label."""

    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon
        self.output_columns = lexicon.labels

    def score(self, text: str) -> dict[str, float]:
        hits = self.lexicon.hits(text)
        total = sum(hits.values())
        k = len(hits)
        return {label: (1.0 + h) / (k + total) for label, h in hits.items()}


class KeywordScorer(Scorer):
    """Smoothed per-label hit rate; labels are scored independently."""

    def __init__(self, keyword_map: dict[str, set[str]]):
        for label, terms in keyword_map.items():
            if not terms:
                raise ValueError(f"label {label!r} has an empty term set")
        self.keyword_map = {label: {t.lower() for t in terms} for label, terms in keyword_map.items()}
        self.output_columns = list(keyword_map)

    def score(self, text: str) -> dict[str, float]:
        toks = tokenize(text)
        n = len(toks)
        out = {}
        for label, terms in self.keyword_map.items():
            hits = sum(1 for t in toks if t in terms)
            out[label] = (1.0 + hits) / (2.0 + n)
        return out


def _check_collisions(table: Table, names: list[str], prefix: str) -> list[str]:
    names = [prefix + n for n in names]
    for n in names:
        if table.has_column(n):
            raise SchemaError(
                f"autocoded column {n!r} already exists; pass a prefix or drop the column"
            )
    return names


def _append_scores(texts, table: Table, scorer: Scorer, prefix: str = "") -> Table:
    if len(texts) != table.n_rows:
        raise ValueError(f"got {len(texts)} texts for a table of {table.n_rows} rows")
    names = _check_collisions(table, scorer.output_columns, prefix)
    cols = {n: [] for n in names}
    for i, text in enumerate(texts):
        scores = scorer.score(text)
        extra = set(scores) - set(scorer.output_columns)
        if extra:
            raise ScoringError(f"row {i}: scorer returned undeclared columns {sorted(extra)}")
        for raw_name, out_name in zip(scorer.output_columns, names):
            v = scores.get(raw_name, 0.0)
            if not (v == v and 0.0 <= v <= 1.0):
                raise ScoringError(f"row {i}: score {v!r} for {raw_name!r} outside [0, 1]")
            cols[out_name].append(float(v))
    for name in names:
        table = table.with_column(name, ColumnKind.NUMERIC, cols[name])
    return table


def code_sentiment(texts, table: Table, lexicon: Lexicon | None = None, prefix: str = "") -> Table:
    """Append `positive` and `negative` columns summing to 1 per row."""
    lexicon = lexicon or Lexicon.builtin("sentiment")
    if set(lexicon.labels) != {"positive", "negative"}:
        raise ValueError("sentiment lexicon must have exactly [positive] and [negative] labels")
    scorer = LexiconScorer(Lexicon({"positive": lexicon.weights["positive"],
                                    "negative": lexicon.weights["negative"]}))
    return _append_scores(texts, table, scorer, prefix)


def code_emotion(texts, table: Table, lexicon: Lexicon | None = None, prefix: str = "") -> Table:
    """Append `joy`, `anger`, `fear`, `sadness` columns summing to 1 per row."""
    lexicon = lexicon or Lexicon.builtin("emotion")
    want = ["joy", "anger", "fear", "sadness"]
    if set(lexicon.labels) != set(want):
        raise ValueError("emotion lexicon must have exactly joy/anger/fear/sadness labels")
    scorer = LexiconScorer(Lexicon({label: lexicon.weights[label] for label in want}))
    return _append_scores(texts, table, scorer, prefix)


def code_custom_topics(
    texts,
    table: Table,
    labels: list[str],
    keyword_map: dict[str, set[str]],
    prefix: str = "",
) -> Table:
    """Append one column per topic label; topics are not mutually exclusive."""
    if not labels:
        raise ValueError("labels must be non-empty")
    missing = [label for label in labels if label not in keyword_map]
    if missing:
        raise ValueError(f"keyword_map missing labels: {missing}")
    scorer = KeywordScorer({label: keyword_map[label] for label in labels})
    return _append_scores(texts, table, scorer, prefix)


def code_callable(texts, table: Table, scorer: Scorer, prefix: str = "") -> Table:
    """Append one column per output declared by a user-supplied scorer."""
    if not scorer.output_columns:
        raise ValueError("scorer declares no output columns")
    return _append_scores(texts, table, scorer, prefix)


def binarize(table: Table, column: str, threshold: float) -> Table:
    """Append `<column>_bin`, 1 iff score is strictly above the threshold."""
    col = table.column(column)
    if col.kind is not ColumnKind.NUMERIC:
        raise SchemaError(f"binarize needs a numeric column, {column!r} is {col.kind.value}")
    values = [1 if v is not None and v > threshold else 0 for v in col.values]
    return table.with_column(f"{column}_bin", ColumnKind.BINARY, values)

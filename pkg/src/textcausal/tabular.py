"""Column-typed tables and design-matrix construction.

A Table holds typed columns (numeric / categorical / text / binary)
loaded from CSV.  A DesignRecipe captures everything needed to map a
Table into a FeatureMatrix deterministically: imputation means,
categorical level order, and an optional fitted TF-IDF vocabulary for
one text column.  The recipe is fit once and reapplied, so component
learners of one causal model all see the same feature space.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .vectorizer import Vocabulary, transform_corpus


class ColumnKind(enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    TEXT = "text"
    BINARY = "binary"


class SchemaError(ValueError):
    pass


class ParseError(ValueError):
    pass


MISSING_LEVEL = "__missing__"
_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


@dataclass
class Column:
    name: str
    kind: ColumnKind
    values: list

    def __len__(self):
        return len(self.values)


@dataclass
class Table:
    columns: list[Column]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise SchemaError(f"columns have differing lengths: {sorted(lengths)}")
        for c in self.columns:
            if c.kind is ColumnKind.BINARY:
                bad = [v for v in c.values if v not in (0, 1)]
                if bad:
                    raise SchemaError(f"binary column {c.name!r} contains non-0/1 value {bad[0]!r}")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no such column: {name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def with_column(self, name: str, kind: ColumnKind, values) -> "Table":
        """Return a new Table with one appended column."""
        if self.has_column(name):
            raise SchemaError(f"column {name!r} already exists")
        return Table(self.columns + [Column(name, kind, list(values))])

    def numeric(self, name: str) -> np.ndarray:
        col = self.column(name)
        if col.kind not in (ColumnKind.NUMERIC, ColumnKind.BINARY):
            raise SchemaError(f"column {name!r} is {col.kind.value}, not numeric")
        return np.array(
            [np.nan if _is_missing(v) else float(v) for v in col.values], dtype=np.float64
        )

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(self.column_names())
            for i in range(self.n_rows):
                w.writerow([_format_cell(c.values[i]) for c in self.columns])


def _format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def _is_missing(v) -> bool:
    if v is None:
        return True
    if isinstance(v, float):
        return np.isnan(v)
    return isinstance(v, str) and v.strip().lower() in _MISSING_TOKENS


def _try_float(s: str) -> float | None:
    try:
        return float(s)
    except ValueError:
        return None


def _infer_kind(raw: list[str]) -> tuple[ColumnKind, list]:
    present = [s for s in raw if not _is_missing(s)]
    nums = [_try_float(s) for s in present]
    if present and all(v is not None for v in nums):
        if set(nums) <= {0.0, 1.0} and not any(_is_missing(s) for s in raw):
            return ColumnKind.BINARY, [int(float(s)) for s in raw]
        return ColumnKind.NUMERIC, [None if _is_missing(s) else float(s) for s in raw]
    n = len(raw)
    distinct = len(set(present))
    if distinct <= max(20, 0.05 * n):
        return ColumnKind.CATEGORICAL, [None if _is_missing(s) else s for s in raw]
    return ColumnKind.TEXT, ["" if _is_missing(s) else s for s in raw]


def _coerce(raw: list[str], kind: ColumnKind, name: str) -> list:
    if kind is ColumnKind.NUMERIC:
        out = []
        for s in raw:
            if _is_missing(s):
                out.append(None)
            else:
                v = _try_float(s)
                if v is None:
                    raise ParseError(f"column {name!r}: cannot parse {s!r} as a number")
                out.append(v)
        return out
    if kind is ColumnKind.BINARY:
        out = []
        for s in raw:
            v = _try_float(s) if not _is_missing(s) else None
            if v not in (0.0, 1.0):
                raise ParseError(f"column {name!r}: non-binary value {s!r}")
            out.append(int(v))
        return out
    if kind is ColumnKind.CATEGORICAL:
        return [None if _is_missing(s) else s for s in raw]
    return ["" if _is_missing(s) else s for s in raw]


def load_csv(path: str, type_hints: dict[str, ColumnKind] | None = None) -> Table:
    """Load a header-row CSV into a typed Table.

    Kinds come from ``type_hints`` where given; otherwise inferred per
    column: all-numeric -> Numeric (or Binary when values are 0/1),
    low-cardinality strings -> Categorical, else Text.
    """
    type_hints = type_hints or {}
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate header names")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            rows.append(row)
    for name in type_hints:
        if name not in header:
            raise SchemaError(f"type hint for unknown column {name!r}")
    columns = []
    for j, name in enumerate(header):
        raw = [r[j] for r in rows]
        if name in type_hints:
            kind = type_hints[name]
            values = _coerce(raw, kind, name)
        else:
            kind, values = _infer_kind(raw)
        columns.append(Column(name, kind, values))
    return Table(columns)


@dataclass
class FeatureMatrix:
    """Design matrix: a dense block plus an optional sparse TF-IDF block."""

    dense: np.ndarray  # (n_rows, n_dense)
    text: sparse.csr_matrix | None
    feature_names: list[str]

    @property
    def n_rows(self) -> int:
        return self.dense.shape[0] if self.dense.size or self.text is None else self.text.shape[0]

    @property
    def n_features(self) -> int:
        return self.dense.shape[1] + (self.text.shape[1] if self.text is not None else 0)

    def toarray(self) -> np.ndarray:
        if self.text is None:
            return self.dense
        return np.hstack([self.dense, self.text.toarray()])

    def tocsr(self) -> sparse.csr_matrix:
        if self.text is None:
            return sparse.csr_matrix(self.dense)
        return sparse.hstack([sparse.csr_matrix(self.dense), self.text], format="csr")

    def with_extra_dense(self, values: np.ndarray, name: str) -> "FeatureMatrix":
        """Append one dense column (used by the S-Learner for the treatment)."""
        col = np.asarray(values, dtype=np.float64).reshape(-1, 1)
        return FeatureMatrix(
            np.hstack([self.dense, col]) if self.dense.size else col,
            self.text,
            self.feature_names[: self.dense.shape[1]] + [name] + self.feature_names[self.dense.shape[1]:],
        )


@dataclass
class DesignRecipe:
    """Fit-time state for mapping a Table into a FeatureMatrix."""

    covariate_cols: list[str]
    text_col: str | None = None
    vocabulary: Vocabulary | None = None
    kinds: dict[str, ColumnKind] = field(default_factory=dict)
    means: dict[str, float] = field(default_factory=dict)
    has_missing: dict[str, bool] = field(default_factory=dict)
    levels: dict[str, list[str]] = field(default_factory=dict)
    fitted: bool = False

    def fit(self, table: Table) -> "DesignRecipe":
        if self.text_col is not None and self.vocabulary is None:
            raise SchemaError("text_col given without a fitted vectorizer")
        for name in self.covariate_cols:
            col = table.column(name)
            self.kinds[name] = col.kind
            if col.kind in (ColumnKind.NUMERIC, ColumnKind.BINARY):
                vals = table.numeric(name)
                missing = np.isnan(vals)
                self.has_missing[name] = bool(missing.any())
                self.means[name] = float(vals[~missing].mean()) if (~missing).any() else 0.0
            elif col.kind is ColumnKind.CATEGORICAL:
                seen: list[str] = []
                for v in col.values:
                    lv = MISSING_LEVEL if v is None else str(v)
                    if lv not in seen:
                        seen.append(lv)
                self.levels[name] = seen
            else:
                raise SchemaError(
                    f"column {name!r} is text; pass it as text_col, not a covariate"
                )
        if self.text_col is not None:
            table.column(self.text_col)  # existence check
        self.fitted = True
        return self

    def transform(self, table: Table) -> FeatureMatrix:
        if not self.fitted:
            raise RuntimeError("recipe not fitted")
        n = table.n_rows
        blocks: list[np.ndarray] = []
        names: list[str] = []
        for name in self.covariate_cols:
            kind = self.kinds[name]
            if kind in (ColumnKind.NUMERIC, ColumnKind.BINARY):
                vals = table.numeric(name)
                missing = np.isnan(vals)
                filled = np.where(missing, self.means[name], vals)
                blocks.append(filled.reshape(-1, 1))
                names.append(name)
                if self.has_missing[name]:
                    blocks.append(missing.astype(np.float64).reshape(-1, 1))
                    names.append(f"{name}__isna")
            else:
                levels = self.levels[name]
                idx = {lv: k for k, lv in enumerate(levels)}
                onehot = np.zeros((n, len(levels)))
                for i, v in enumerate(table.column(name).values):
                    lv = MISSING_LEVEL if v is None else str(v)
                    k = idx.get(lv)
                    if k is not None:  # unseen level -> all-zero row
                        onehot[i, k] = 1.0
                blocks.append(onehot)
                names.extend(f"{name}={lv}" for lv in levels)
        dense = np.hstack(blocks) if blocks else np.zeros((n, 0))
        text = None
        if self.text_col is not None:
            texts = table.column(self.text_col).values
            text = transform_corpus([t or "" for t in texts], self.vocabulary)
            names.extend(self.vocabulary.feature_names())
        return FeatureMatrix(dense, text, names)


def build_design_matrix(
    table: Table,
    covariate_cols: list[str],
    text_col: str | None = None,
    vectorizer: Vocabulary | None = None,
    ignore_cols: list[str] | None = None,
) -> FeatureMatrix:
    """Fit a recipe on ``table`` and apply it, returning the matrix."""
    ignore = set(ignore_cols or [])
    cols = [c for c in covariate_cols if c not in ignore]
    recipe = DesignRecipe(cols, text_col=text_col, vocabulary=vectorizer)
    return recipe.fit(table).transform(table)

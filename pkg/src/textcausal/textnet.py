"""S-Learner with a trainable text encoder and per-treatment heads.

The predicted outcome is sigma(M_t^b . b(W) + M_t^c . c + b) where b(W)
is the mean of learned token embeddings, c one-hot-encodes the extra
covariates, and each treatment value t owns its own head (M_t^b, M_t^c).
A training sample with observed treatment t updates the encoder, the
bias, and head t only; the other head gets exactly zero gradient, which
preserves the treatment effect against the high-dimensional text
representation.  The encoder is deliberately small (mean embeddings, no
attention) so training stays CPU-bound in seconds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .learners import sigmoid
from .metalearners import EffectEstimate, PositivityError, _masked_mean_estimate
from .tabular import ColumnKind, SchemaError, Table
from .vectorizer import VectorizerConfig, Vocabulary, fit_vocabulary, tokenize


@dataclass(frozen=True)
class TextNetSpec:
    embed_dim: int = 64
    learning_rate: float = 0.01
    epochs: int = 20
    batch_size: int = 32
    q_weight: float = 0.1
    min_df: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.learning_rate <= 0 or self.q_weight <= 0:
            raise ValueError("learning_rate and q_weight must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TextNetSpec":
        return cls(**d)


@dataclass
class TextNetParams:
    embeddings: np.ndarray  # (|V|, d)
    head_text: np.ndarray  # (2, d):   M_t^b
    head_cov: np.ndarray  # (2, |C|): M_t^c
    bias: float
    vocabulary: Vocabulary
    cov_names: list[str]
    cov_levels: dict[str, list[str]]
    text_col: str = "text"
    spec: TextNetSpec = field(default_factory=TextNetSpec)

    def save(self, path: str) -> None:
        v = self.vocabulary
        bundle = {
            "version": 1,
            "spec": self.spec.to_dict(),
            "embeddings": self.embeddings.tolist(),
            "head_text": self.head_text.tolist(),
            "head_cov": self.head_cov.tolist(),
            "bias": self.bias,
            "vocabulary": {
                "term_index": v.term_index,
                "document_frequency": v.document_frequency,
                "n_docs": v.n_docs,
                "config": asdict(v.config),
            },
            "cov_names": self.cov_names,
            "cov_levels": self.cov_levels,
            "text_col": self.text_col,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(bundle, f)

    @classmethod
    def load(cls, path: str) -> "TextNetParams":
        with open(path, encoding="utf-8") as f:
            b = json.load(f)
        v = b["vocabulary"]
        return cls(
            embeddings=np.asarray(b["embeddings"], dtype=np.float64),
            head_text=np.asarray(b["head_text"], dtype=np.float64),
            head_cov=np.asarray(b["head_cov"], dtype=np.float64),
            bias=b["bias"],
            vocabulary=Vocabulary(
                v["term_index"], v["document_frequency"], v["n_docs"],
                VectorizerConfig(**v["config"]),
            ),
            cov_names=list(b["cov_names"]),
            cov_levels={k: list(lv) for k, lv in b["cov_levels"].items()},
            text_col=b.get("text_col", "text"),
            spec=TextNetSpec.from_dict(b["spec"]),
        )


def _token_ids(text: str, vocab: Vocabulary) -> list[int]:
    return [vocab.term_index[t] for t in tokenize(text) if t in vocab.term_index]


def encode(text: str, params: TextNetParams) -> np.ndarray:
    """Mean embedding of in-vocabulary tokens; zero vector when all OOV."""
    ids = _token_ids(text, params.vocabulary)
    if not ids:
        return np.zeros(params.embeddings.shape[1])
    return params.embeddings[ids].mean(axis=0)


def forward(t: int, bw: np.ndarray, c: np.ndarray, params: TextNetParams) -> float:
    """Predicted outcome probability using head t only."""
    if t not in (0, 1):
        raise ValueError("treatment must be 0 or 1")
    if bw.shape[0] != params.head_text.shape[1] or c.shape[0] != params.head_cov.shape[1]:
        raise ValueError("dimension mismatch between inputs and heads")
    z = params.head_text[t] @ bw + params.head_cov[t] @ c + params.bias
    return float(sigmoid(np.asarray([z]))[0])


def _cov_design(table: Table, cov_cols: list[str], levels: dict[str, list[str]] | None = None):
    """One-hot covariates (numeric columns pass through)."""
    n = table.n_rows
    blocks = []
    fitted_levels: dict[str, list[str]] = {}
    for name in cov_cols:
        col = table.column(name)
        if col.kind is ColumnKind.NUMERIC:
            blocks.append(table.numeric(name).reshape(-1, 1))
            continue
        if col.kind is ColumnKind.TEXT:
            raise SchemaError(f"covariate {name!r} is text; pass it as text_col")
        if levels is not None:
            lvs = levels[name]
        else:
            lvs = []
            for v in col.values:
                s = "" if v is None else str(v)
                if s not in lvs:
                    lvs.append(s)
        fitted_levels[name] = lvs
        idx = {lv: k for k, lv in enumerate(lvs)}
        oh = np.zeros((n, len(lvs)))
        for i, v in enumerate(col.values):
            k = idx.get("" if v is None else str(v))
            if k is not None:
                oh[i, k] = 1.0
        blocks.append(oh)
    C = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return C, fitted_levels


@dataclass
class _Batch:
    doc_ids: list[np.ndarray]  # token id arrays, one per sample
    C: np.ndarray
    t: np.ndarray
    y: np.ndarray


def _loss_and_grads(params: TextNetParams, batch: _Batch, q_weight: float):
    """Mean q_weight-scaled cross-entropy and gradients for one minibatch.

    Returns (loss, d_embeddings, d_head_text, d_head_cov, d_bias).
    Gradients for head (1-t) of a sample are identically zero.
    """
    d = params.embeddings.shape[1]
    nb = len(batch.doc_ids)
    bw = np.zeros((nb, d))
    for i, ids in enumerate(batch.doc_ids):
        if len(ids):
            bw[i] = params.embeddings[ids].mean(axis=0)
    t = batch.t.astype(int)
    z = (
        np.einsum("ij,ij->i", params.head_text[t], bw)
        + np.einsum("ij,ij->i", params.head_cov[t], batch.C)
        + params.bias
    )
    p = sigmoid(z)
    eps = 1e-12
    loss = q_weight * float(
        np.mean(-(batch.y * np.log(p + eps) + (1 - batch.y) * np.log(1 - p + eps)))
    )
    dz = q_weight * (p - batch.y) / nb
    dE = np.zeros_like(params.embeddings)
    dMb = np.zeros_like(params.head_text)
    dMc = np.zeros_like(params.head_cov)
    for i in range(nb):
        ti = t[i]
        dMb[ti] += dz[i] * bw[i]
        dMc[ti] += dz[i] * batch.C[i]
        ids = batch.doc_ids[i]
        if len(ids):
            np.add.at(dE, ids, dz[i] * params.head_text[ti] / len(ids))
    db = float(dz.sum())
    return loss, dE, dMb, dMc, db


def init_params(
    vocab: Vocabulary, n_cov: int, base_rate: float, spec: TextNetSpec, cov_names, cov_levels,
    text_col: str = "text",
) -> TextNetParams:
    """Embeddings ~ U(+-1/sqrt(d)), heads zero, bias at the outcome log-odds."""
    rng = np.random.default_rng(spec.seed)
    d = spec.embed_dim
    emb = rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=(len(vocab), d))
    base_rate = float(np.clip(base_rate, 1e-6, 1 - 1e-6))
    return TextNetParams(
        embeddings=emb,
        head_text=np.zeros((2, d)),
        head_cov=np.zeros((2, n_cov)),
        bias=float(np.log(base_rate / (1 - base_rate))),
        vocabulary=vocab,
        cov_names=list(cov_names),
        cov_levels=cov_levels,
        text_col=text_col,
        spec=spec,
    )


def train(
    table: Table,
    text_col: str,
    covariate_cols,
    treatment_col: str,
    outcome_col: str,
    spec: TextNetSpec | None = None,
) -> TextNetParams:
    """Minibatch SGD on per-head cross-entropy scaled by q_weight."""
    spec = spec or TextNetSpec()
    if isinstance(covariate_cols, str):
        covariate_cols = [covariate_cols]
    covariate_cols = list(covariate_cols)
    t = np.asarray(table.column(treatment_col).values, dtype=np.float64)
    y = np.asarray(table.column(outcome_col).values, dtype=np.float64)
    if not set(np.unique(t)) <= {0.0, 1.0} or not set(np.unique(y)) <= {0.0, 1.0}:
        raise SchemaError("treatment and outcome must be binary")
    if len(set(t)) < 2:
        raise PositivityError("one treatment arm is empty")
    if len(set(y)) < 2:
        raise ValueError("degenerate outcome: single class")
    texts = [s or "" for s in table.column(text_col).values]
    vocab = fit_vocabulary(texts, VectorizerConfig(min_df=spec.min_df, max_features=20000))
    C, cov_levels = _cov_design(table, covariate_cols)
    params = init_params(vocab, C.shape[1], float(y.mean()), spec, covariate_cols, cov_levels,
                         text_col=text_col)
    doc_ids = [np.asarray(_token_ids(s, vocab), dtype=np.int64) for s in texts]
    n = table.n_rows
    rng = np.random.default_rng(spec.seed + 1)
    lr = spec.learning_rate
    for _epoch in range(spec.epochs):
        order = rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            idx = order[start : start + spec.batch_size]
            batch = _Batch([doc_ids[i] for i in idx], C[idx], t[idx], y[idx])
            _, dE, dMb, dMc, db = _loss_and_grads(params, batch, spec.q_weight)
            params.embeddings -= lr * dE
            params.head_text -= lr * dMb
            params.head_cov -= lr * dMc
            params.bias -= lr * db
    return params


def _head_diffs(params: TextNetParams, table: Table, text_col: str) -> np.ndarray:
    texts = [s or "" for s in table.column(text_col).values]
    C, _ = _cov_design(table, params.cov_names, levels=params.cov_levels)
    d = params.embeddings.shape[1]
    bw = np.zeros((table.n_rows, d))
    for i, s in enumerate(texts):
        ids = _token_ids(s, params.vocabulary)
        if ids:
            bw[i] = params.embeddings[ids].mean(axis=0)
    z1 = bw @ params.head_text[1] + C @ params.head_cov[1] + params.bias
    z0 = bw @ params.head_text[0] + C @ params.head_cov[0] + params.bias
    return sigmoid(z1) - sigmoid(z0)


def estimate_ate(
    params: TextNetParams,
    table: Table,
    text_col: str,
    mask=None,
    bootstrap: int = 200,
    mask_desc: str | None = None,
) -> EffectEstimate:
    """Sample-average difference of the two heads' predictions."""
    diffs = _head_diffs(params, table, text_col)
    desc = mask_desc or ("all rows" if mask is None else "custom mask")
    return _masked_mean_estimate(diffs, mask, "textnet", desc, bootstrap, params.spec.seed)

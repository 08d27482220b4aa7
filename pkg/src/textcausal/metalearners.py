"""S-, T-, X-, and R-Learners over mixed tabular+text data.

Each meta-learner composes base learners (learners.py) on a shared
feature recipe: the TF-IDF vocabulary is fit once per causal model on
the full text column, so every component sees an identical feature
space.  ITEs are per-row estimates; ATE/CATE are (masked) sample
averages with a row-resampling bootstrap standard error.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import learners
from .learners import FittedLearner, LearnerSpec, DegenerateTargetError
from .tabular import ColumnKind, DesignRecipe, SchemaError, Table
from .vectorizer import VectorizerConfig, Vocabulary, fit_vocabulary


class PositivityError(ValueError):
    pass


PROPENSITY_CLIP = (0.01, 0.99)


@dataclass(frozen=True)
class CausalSpec:
    method: str  # s | t | x | r
    treatment_col: str
    outcome_col: str
    include_cols: tuple[str, ...] = ()
    text_col: str | None = None
    ignore_cols: tuple[str, ...] = ()
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    effect_learner: LearnerSpec | None = None  # X stage 2 / R final; defaults to gbdt regression
    propensity: LearnerSpec = field(default_factory=lambda: LearnerSpec(kind="logistic"))
    vectorizer: VectorizerConfig = field(default_factory=VectorizerConfig)
    n_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("s", "t", "x", "r"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.treatment_col in self.include_cols:
            raise SchemaError("treatment_col must not appear in include_cols")
        if self.outcome_col in self.include_cols:
            raise SchemaError("outcome_col must not appear in include_cols")
        if self.text_col in (self.treatment_col, self.outcome_col) and self.text_col is not None:
            raise SchemaError("text_col must be distinct from treatment and outcome")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["include_cols"] = list(self.include_cols)
        d["ignore_cols"] = list(self.ignore_cols)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CausalSpec":
        return cls(
            method=d["method"],
            treatment_col=d["treatment_col"],
            outcome_col=d["outcome_col"],
            include_cols=tuple(d.get("include_cols", ())),
            text_col=d.get("text_col"),
            ignore_cols=tuple(d.get("ignore_cols", ())),
            learner=LearnerSpec.from_dict(d.get("learner", {})),
            effect_learner=(
                LearnerSpec.from_dict(d["effect_learner"])
                if d.get("effect_learner") is not None
                else None
            ),
            propensity=LearnerSpec.from_dict(
                d.get("propensity", {"kind": "logistic"})
            ),
            vectorizer=VectorizerConfig(**d.get("vectorizer", {})),
            n_folds=d.get("n_folds", 5),
            seed=d.get("seed", 0),
        )


@dataclass
class EffectEstimate:
    ate: float
    n: int
    std_error: float
    method: str
    mask: str = "all rows"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class CausalModel:
    spec: CausalSpec
    recipe: DesignRecipe
    outcome_task: str
    components: dict[str, FittedLearner] = field(default_factory=dict)

    def save(self, path: str) -> None:
        bundle = {
            "version": 1,
            "spec": self.spec.to_dict(),
            "outcome_task": self.outcome_task,
            "recipe": _recipe_to_dict(self.recipe),
            "components": {k: v.to_dict() for k, v in self.components.items()},
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(bundle, f)

    @classmethod
    def load(cls, path: str) -> "CausalModel":
        with open(path, encoding="utf-8") as f:
            bundle = json.load(f)
        return cls(
            spec=CausalSpec.from_dict(bundle["spec"]),
            recipe=_recipe_from_dict(bundle["recipe"]),
            outcome_task=bundle["outcome_task"],
            components={k: FittedLearner.from_dict(v) for k, v in bundle["components"].items()},
        )


def _recipe_to_dict(r: DesignRecipe) -> dict:
    vocab = None
    if r.vocabulary is not None:
        v = r.vocabulary
        vocab = {
            "term_index": v.term_index,
            "document_frequency": v.document_frequency,
            "n_docs": v.n_docs,
            "config": asdict(v.config),
        }
    return {
        "covariate_cols": r.covariate_cols,
        "text_col": r.text_col,
        "vocabulary": vocab,
        "kinds": {k: v.value for k, v in r.kinds.items()},
        "means": r.means,
        "has_missing": r.has_missing,
        "levels": r.levels,
    }


def _recipe_from_dict(d: dict) -> DesignRecipe:
    vocab = None
    if d["vocabulary"] is not None:
        v = d["vocabulary"]
        vocab = Vocabulary(
            term_index=v["term_index"],
            document_frequency=v["document_frequency"],
            n_docs=v["n_docs"],
            config=VectorizerConfig(**v["config"]),
        )
    r = DesignRecipe(
        covariate_cols=list(d["covariate_cols"]),
        text_col=d["text_col"],
        vocabulary=vocab,
        kinds={k: ColumnKind(v) for k, v in d["kinds"].items()},
        means=dict(d["means"]),
        has_missing=dict(d["has_missing"]),
        levels={k: list(v) for k, v in d["levels"].items()},
    )
    r.fitted = True
    return r


def _binary_treatment(table: Table, name: str) -> np.ndarray:
    col = table.column(name)
    if col.kind is not ColumnKind.BINARY:
        raise SchemaError(f"treatment column {name!r} must be binary")
    return np.asarray(col.values, dtype=np.float64)


def _outcome(table: Table, name: str) -> tuple[np.ndarray, str]:
    col = table.column(name)
    if col.kind is ColumnKind.BINARY:
        return np.asarray(col.values, dtype=np.float64), "binary-classification"
    if col.kind is ColumnKind.NUMERIC:
        return table.numeric(name), "regression"
    raise SchemaError(f"outcome column {name!r} must be binary or numeric")


def _check_arms(t: np.ndarray) -> None:
    if not (t == 1).any():
        raise PositivityError("treated arm is empty (no rows with treatment=1)")
    if not (t == 0).any():
        raise PositivityError("control arm is empty (no rows with treatment=0)")


def _fit_recipe(table: Table, spec: CausalSpec) -> DesignRecipe:
    covs = [c for c in spec.include_cols if c not in set(spec.ignore_cols)]
    vocab = None
    if spec.text_col is not None:
        texts = [t or "" for t in table.column(spec.text_col).values]
        vocab = fit_vocabulary(texts, spec.vectorizer)
    recipe = DesignRecipe(covs, text_col=spec.text_col, vocabulary=vocab)
    return recipe.fit(table)


def _effect_spec(spec: CausalSpec) -> LearnerSpec:
    if spec.effect_learner is not None:
        return spec.effect_learner
    if spec.learner.kind == "logistic":
        # imputed effects / pseudo-outcomes are continuous
        return LearnerSpec(kind="linear", seed=spec.learner.seed)
    return spec.learner


def _subset_rows(table: Table, idx: np.ndarray) -> Table:
    from .tabular import Column

    return Table(
        [Column(c.name, c.kind, [c.values[i] for i in idx]) for c in table.columns]
    )


def _seeded(spec: LearnerSpec, seed: int) -> LearnerSpec:
    return LearnerSpec(kind=spec.kind, logistic=spec.logistic, gbdt=spec.gbdt, seed=seed)


def fit_t_learner(table: Table, spec: CausalSpec) -> CausalModel:
    """Two outcome models, one per arm; neither sees the treatment."""
    t = _binary_treatment(table, spec.treatment_col)
    y, task = _outcome(table, spec.outcome_col)
    _check_arms(t)
    recipe = _fit_recipe(table, spec)
    model = CausalModel(spec, recipe, task)
    for arm, name in ((0, "mu0"), (1, "mu1")):
        idx = np.flatnonzero(t == arm)
        Xa = recipe.transform(_subset_rows(table, idx))
        try:
            model.components[name] = learners.fit(
                Xa, y[idx], _seeded(spec.learner, spec.seed + arm), task
            )
        except DegenerateTargetError:
            # constant outcome inside one arm: fall back to the arm mean
            model.components[name] = learners.fit_linear(Xa, y[idx] * 0 + y[idx].mean())
    return model


def fit_s_learner(table: Table, spec: CausalSpec) -> CausalModel:
    """Single outcome model with the treatment appended as a feature."""
    t = _binary_treatment(table, spec.treatment_col)
    y, task = _outcome(table, spec.outcome_col)
    _check_arms(t)
    recipe = _fit_recipe(table, spec)
    X = recipe.transform(table).with_extra_dense(t, spec.treatment_col)
    model = CausalModel(spec, recipe, task)
    model.components["mu"] = learners.fit(X, y, _seeded(spec.learner, spec.seed), task)
    return model


def _fit_propensity(X, t: np.ndarray, spec: CausalSpec, seed: int) -> FittedLearner:
    pspec = spec.propensity
    if pspec.kind != "logistic":
        raise ValueError("propensity model must be logistic")
    return learners.fit_logistic(X, t, _seeded(pspec, seed))


def _clip_propensity(e: np.ndarray) -> np.ndarray:
    return np.clip(e, *PROPENSITY_CLIP)


def fit_x_learner(table: Table, spec: CausalSpec) -> CausalModel:
    """T-Learner stage, imputed per-arm effects, propensity-blended combination."""
    t = _binary_treatment(table, spec.treatment_col)
    y, task = _outcome(table, spec.outcome_col)
    _check_arms(t)
    tmodel = fit_t_learner(table, spec)
    recipe = tmodel.recipe
    model = CausalModel(spec, recipe, task)
    model.components.update(tmodel.components)

    X = recipe.transform(table)
    mu0 = learners.predict(model.components["mu0"], X)
    mu1 = learners.predict(model.components["mu1"], X)
    espec = _effect_spec(spec)
    idx1 = np.flatnonzero(t == 1)
    idx0 = np.flatnonzero(t == 0)
    X1 = recipe.transform(_subset_rows(table, idx1))
    X0 = recipe.transform(_subset_rows(table, idx0))
    d1 = y[idx1] - mu0[idx1]
    d0 = mu1[idx0] - y[idx0]
    model.components["tau1"] = learners.fit(X1, d1, _seeded(espec, spec.seed + 11), "regression")
    model.components["tau0"] = learners.fit(X0, d0, _seeded(espec, spec.seed + 12), "regression")
    model.components["g"] = _fit_propensity(X, t, spec, spec.seed + 13)
    return model


def fit_r_learner(table: Table, spec: CausalSpec) -> CausalModel:
    """Cross-fit nuisances, then a weighted pseudo-outcome regression."""
    t = _binary_treatment(table, spec.treatment_col)
    y, task = _outcome(table, spec.outcome_col)
    _check_arms(t)
    n = table.n_rows
    if n < 5 * spec.n_folds:
        raise PositivityError(f"need at least {5 * spec.n_folds} rows for {spec.n_folds}-fold R-Learner")
    recipe = _fit_recipe(table, spec)
    X = recipe.transform(table)
    rng = np.random.default_rng(spec.seed)
    fold = rng.permutation(n) % spec.n_folds
    m_hat = np.zeros(n)
    e_hat = np.zeros(n)
    for k in range(spec.n_folds):
        train = np.flatnonzero(fold != k)
        test = np.flatnonzero(fold == k)
        if len(set(t[train])) < 2:
            raise PositivityError(f"fold {k}: training rows contain a single treatment class")
        Xtr = recipe.transform(_subset_rows(table, train))
        Xte = recipe.transform(_subset_rows(table, test))
        m = learners.fit(Xtr, y[train], _seeded(spec.learner, spec.seed + 100 + k), task)
        m_hat[test] = learners.predict(m, Xte)
        e = _fit_propensity(Xtr, t[train], spec, spec.seed + 200 + k)
        e_hat[test] = learners.predict(e, Xte)
    e_hat = _clip_propensity(e_hat)
    y_res = y - m_hat
    t_res = t - e_hat
    pseudo = y_res / t_res
    weights = t_res**2
    espec = _effect_spec(spec)
    model = CausalModel(spec, recipe, task)
    model.components["tau"] = learners.fit(
        X, pseudo, _seeded(espec, spec.seed + 300), "regression", sample_weight=weights
    )
    return model


_FITTERS = {"s": fit_s_learner, "t": fit_t_learner, "x": fit_x_learner, "r": fit_r_learner}


def fit(table: Table, spec: CausalSpec) -> CausalModel:
    return _FITTERS[spec.method](table, spec)


def predict_ite(model: CausalModel, table: Table) -> np.ndarray:
    """Per-row treatment effect estimates tau_hat(x)."""
    spec = model.spec
    recipe = model.recipe
    X = recipe.transform(table)
    if spec.method == "t":
        return learners.predict(model.components["mu1"], X) - learners.predict(
            model.components["mu0"], X
        )
    if spec.method == "s":
        n = table.n_rows
        X1 = X.with_extra_dense(np.ones(n), spec.treatment_col)
        X0 = X.with_extra_dense(np.zeros(n), spec.treatment_col)
        mu = model.components["mu"]
        return learners.predict(mu, X1) - learners.predict(mu, X0)
    if spec.method == "x":
        tau0 = learners.predict(model.components["tau0"], X)
        tau1 = learners.predict(model.components["tau1"], X)
        g = _clip_propensity(learners.predict(model.components["g"], X))
        return g * tau0 + (1 - g) * tau1
    return learners.predict(model.components["tau"], X)


def _masked_mean_estimate(
    ite: np.ndarray,
    mask: np.ndarray | None,
    method: str,
    mask_desc: str,
    bootstrap: int,
    seed: int,
) -> EffectEstimate:
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if len(mask) != len(ite):
            raise ValueError(f"mask length {len(mask)} != n_rows {len(ite)}")
        sel = ite[mask]
    else:
        sel = ite
    if len(sel) == 0:
        raise PositivityError("mask selects no rows")
    ate = float(sel.mean())
    rng = np.random.default_rng(seed)
    if bootstrap > 0 and len(sel) > 1:
        means = np.array(
            [sel[rng.integers(0, len(sel), len(sel))].mean() for _ in range(bootstrap)]
        )
        se = float(means.std(ddof=0))
    else:
        se = 0.0
    return EffectEstimate(ate=ate, n=int(len(sel)), std_error=se, method=method, mask=mask_desc)


def estimate_ate(
    model: CausalModel,
    table: Table,
    mask=None,
    bootstrap: int = 200,
    mask_desc: str | None = None,
) -> EffectEstimate:
    """(Masked) sample-average of predict_ite with a bootstrap std error.

    The bootstrap resamples rows and reuses the fitted model; refitting
    per resample is orders of magnitude slower and left to callers who
    need it.
    """
    ite = predict_ite(model, table)
    desc = mask_desc or ("all rows" if mask is None else "custom mask")
    return _masked_mean_estimate(ite, mask, model.spec.method, desc, bootstrap, model.spec.seed)


def naive_ate(
    table: Table, treatment_col: str, outcome_col: str, bootstrap: int = 200, seed: int = 0
) -> EffectEstimate:
    """Difference in arm means with no covariate adjustment."""
    t = _binary_treatment(table, treatment_col)
    y, _ = _outcome(table, outcome_col)
    _check_arms(t)
    y1, y0 = y[t == 1], y[t == 0]
    ate = float(y1.mean() - y0.mean())
    rng = np.random.default_rng(seed)
    if bootstrap > 0:
        diffs = np.array(
            [
                y1[rng.integers(0, len(y1), len(y1))].mean()
                - y0[rng.integers(0, len(y0), len(y0))].mean()
                for _ in range(bootstrap)
            ]
        )
        se = float(diffs.std(ddof=0))
    else:
        se = 0.0
    return EffectEstimate(ate=ate, n=table.n_rows, std_error=se, method="naive")


def overlap_diagnostics(model: CausalModel, table: Table) -> dict:
    """Arm sizes and, for X/R, the share of clipped propensities (warnings only)."""
    t = _binary_treatment(table, model.spec.treatment_col)
    out = {"n_treated": int((t == 1).sum()), "n_control": int((t == 0).sum())}
    if "g" in model.components:
        X = model.recipe.transform(table)
        e = learners.predict(model.components["g"], X)
        lo, hi = PROPENSITY_CLIP
        out["clipped_propensity_fraction"] = float(((e < lo) | (e > hi)).mean())
    return out


def timed_fit(table: Table, spec: CausalSpec) -> tuple[CausalModel, float]:
    t0 = time.perf_counter()
    model = fit(table, spec)
    return model, time.perf_counter() - t0

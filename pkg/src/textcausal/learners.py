"""Base learners composed by the meta-learners.

Three families behind one predict contract:

* linear regression (ridge-jittered least squares),
* logistic regression with none/l2 (Newton) or l1 (coordinate descent)
  penalties,
* leaf-wise histogram GBDT (see gbdt.py).

All fits are deterministic given (X, y, spec, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import lsqr

from .tabular import FeatureMatrix


class DegenerateTargetError(ValueError):
    pass


@dataclass(frozen=True)
class LogisticParams:
    penalty: str = "l2"  # l1 | l2 | none
    C: float = 1.0
    fit_intercept: bool = True
    max_iter: int = 1000
    tol: float = 1e-6

    def __post_init__(self):
        if self.penalty not in ("l1", "l2", "none"):
            raise ValueError(f"unknown penalty {self.penalty!r}")
        if self.C <= 0:
            raise ValueError("C must be > 0")


@dataclass(frozen=True)
class GbdtParams:
    num_leaves: int = 31
    min_child_samples: int = 20
    min_child_weight: float = 1e-3
    colsample_bytree: float = 1.0
    subsample: float = 1.0
    reg_alpha: float = 0.0
    reg_lambda: float = 0.0
    learning_rate: float = 0.1
    n_rounds: int = 100
    max_bins: int = 255

    def __post_init__(self):
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if not (0 < self.colsample_bytree <= 1 and 0 < self.subsample <= 1):
            raise ValueError("colsample_bytree and subsample must be in (0, 1]")
        if self.reg_alpha < 0 or self.reg_lambda < 0:
            raise ValueError("reg_alpha and reg_lambda must be >= 0")


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "gbdt"  # linear | logistic | gbdt
    logistic: LogisticParams = field(default_factory=LogisticParams)
    gbdt: GbdtParams = field(default_factory=GbdtParams)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("linear", "logistic", "gbdt"):
            raise ValueError(f"unknown learner kind {self.kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerSpec":
        return cls(
            kind=d.get("kind", "gbdt"),
            logistic=LogisticParams(**d.get("logistic", {})),
            gbdt=GbdtParams(**d.get("gbdt", {})),
            seed=d.get("seed", 0),
        )


@dataclass
class FittedLearner:
    spec: LearnerSpec
    task: str  # regression | binary-classification
    n_features: int
    coef: np.ndarray | None = None  # linear / logistic
    intercept: float = 0.0
    ensemble: "object | None" = None  # gbdt.Ensemble

    def to_dict(self) -> dict:
        d = {
            "spec": self.spec.to_dict(),
            "task": self.task,
            "n_features": self.n_features,
            "intercept": self.intercept,
        }
        d["coef"] = None if self.coef is None else self.coef.tolist()
        d["ensemble"] = None if self.ensemble is None else self.ensemble.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FittedLearner":
        from .gbdt import Ensemble

        return cls(
            spec=LearnerSpec.from_dict(d["spec"]),
            task=d["task"],
            n_features=d["n_features"],
            coef=None if d["coef"] is None else np.asarray(d["coef"], dtype=np.float64),
            intercept=d["intercept"],
            ensemble=None if d["ensemble"] is None else Ensemble.from_dict(d["ensemble"]),
        )


def _as_matrix(X):
    """Accept FeatureMatrix, ndarray, or scipy sparse; return one of the latter two."""
    if isinstance(X, FeatureMatrix):
        return X.dense if X.text is None else X.tocsr()
    if sparse.issparse(X):
        return X.tocsr()
    return np.asarray(X, dtype=np.float64)


def _n_features(M) -> int:
    return M.shape[1]


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ----------------------------------------------------------------- linear


def fit_linear(X, y, spec: LearnerSpec | None = None, sample_weight=None) -> FittedLearner:
    """Least squares with ridge jitter 1e-8 and an intercept."""
    spec = spec or LearnerSpec(kind="linear")
    M = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    n = M.shape[0]
    if n == 0:
        raise ValueError("cannot fit on zero rows")
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    jitter = 1e-8
    if sparse.issparse(M):
        # damped LSQR on weighted rows; damp^2 matches the ridge jitter
        sw = np.sqrt(w)
        A = sparse.hstack([M, np.ones((n, 1))], format="csr")
        A = sparse.diags(sw) @ A
        b = sw * y
        sol = lsqr(A, b, damp=np.sqrt(jitter), atol=1e-12, btol=1e-12, iter_lim=10000)[0]
        coef, intercept = sol[:-1], float(sol[-1])
    else:
        A = np.hstack([M, np.ones((n, 1))])
        G = (A * w[:, None]).T @ A
        G[np.diag_indices_from(G)] += jitter
        b = (A * w[:, None]).T @ y
        sol = np.linalg.solve(G, b)
        coef, intercept = sol[:-1], float(sol[-1])
    return FittedLearner(spec, "regression", _n_features(M), coef=coef, intercept=intercept)


# --------------------------------------------------------------- logistic


def logistic_nll_grad(beta: np.ndarray, M, y: np.ndarray, l2: float = 0.0):
    """Mean logistic loss and gradient; beta includes the intercept last.

    The l2 term penalizes slopes only.  This is the smooth part of the
    objective; the solvers and the finite-difference tests share it.
    """
    n = M.shape[0]
    z = M @ beta[:-1] + beta[-1]
    p = sigmoid(z)
    # stable log-loss
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    g = (p - y) / n
    grad = np.empty_like(beta)
    grad[:-1] = M.T @ g
    grad[-1] = g.sum()
    if l2 > 0:
        loss += 0.5 * l2 * float(beta[:-1] @ beta[:-1])
        grad[:-1] += l2 * beta[:-1]
    return loss, grad


def _fit_logistic_newton(M, y, l2, fit_intercept, max_iter, tol):
    n, p = M.shape
    beta = np.zeros(p + 1)
    for _ in range(max_iter):
        z = M @ beta[:-1] + beta[-1]
        prob = sigmoid(z)
        w = np.clip(prob * (1 - prob), 1e-10, None)
        g = (prob - y) / n
        grad = np.empty(p + 1)
        grad[:-1] = M.T @ g + l2 * beta[:-1]
        grad[-1] = g.sum() if fit_intercept else 0.0
        if sparse.issparse(M):
            Mw = M.multiply(w[:, None] / n)
            H = np.asarray((M.T @ Mw).todense())
            hb = np.asarray(M.T @ (w / n)).ravel()
        else:
            Mw = M * (w[:, None] / n)
            H = M.T @ Mw
            hb = M.T @ (w / n)
        Hfull = np.zeros((p + 1, p + 1))
        Hfull[:p, :p] = H + np.eye(p) * (l2 + 1e-10)
        Hfull[:p, -1] = hb
        Hfull[-1, :p] = hb
        Hfull[-1, -1] = (w.sum() / n) if fit_intercept else 1.0
        step = np.linalg.solve(Hfull, grad)
        if not fit_intercept:
            step[-1] = 0.0
        beta -= step
        if np.max(np.abs(step)) < tol:
            break
    return beta


def _col(M, j):
    if sparse.issparse(M):
        return np.asarray(M[:, [j]].todense()).ravel()
    return M[:, j]


def _fit_logistic_cd_l1(M, y, alpha, fit_intercept, max_iter, tol):
    """GLMNET-style: outer IRLS, inner coordinate descent with soft-thresholding."""
    n, p = M.shape
    Mc = M.tocsc() if sparse.issparse(M) else M
    cols = [_col(Mc, j) for j in range(p)]
    beta = np.zeros(p + 1)
    eta = np.zeros(n)
    for _ in range(max_iter):
        prob = sigmoid(eta)
        w = np.clip(prob * (1 - prob), 1e-5, None)
        z = eta + (y - prob) / w
        r = z - eta
        delta_outer = 0.0
        for _sweep in range(100):
            max_delta = 0.0
            for j in range(p):
                xj = cols[j]
                wxx = float(w @ (xj * xj))
                if wxx == 0.0:
                    continue
                rho = float((w * r) @ xj) + wxx * beta[j]
                new = np.sign(rho) * max(abs(rho) - alpha * n, 0.0) / wxx
                d = new - beta[j]
                if d != 0.0:
                    r -= d * xj
                    beta[j] = new
                    max_delta = max(max_delta, abs(d))
            if fit_intercept:
                d = float(w @ r) / float(w.sum())
                if d != 0.0:
                    beta[-1] += d
                    r -= d
                    max_delta = max(max_delta, abs(d))
            delta_outer = max(delta_outer, max_delta)
            if max_delta < tol:
                break
        eta = (M @ beta[:-1]) + beta[-1]
        if delta_outer < tol:
            break
    return beta


def fit_logistic(X, y, spec: LearnerSpec | None = None) -> FittedLearner:
    """Binary logistic regression; objective = mean log-loss + penalty/(C*n)."""
    spec = spec or LearnerSpec(kind="logistic")
    params = spec.logistic
    M = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    classes = set(np.unique(y))
    if not classes <= {0.0, 1.0}:
        raise ValueError("logistic targets must be 0/1")
    if len(classes) < 2:
        raise DegenerateTargetError("single-class targets: cannot fit a classifier")
    n = M.shape[0]
    if params.penalty == "l1":
        alpha = 1.0 / (params.C * n)
        beta = _fit_logistic_cd_l1(M, y, alpha, params.fit_intercept, params.max_iter, params.tol)
    else:
        l2 = 0.0 if params.penalty == "none" else 1.0 / (params.C * n)
        beta = _fit_logistic_newton(M, y, l2, params.fit_intercept, params.max_iter, params.tol)
    return FittedLearner(
        spec, "binary-classification", _n_features(M), coef=beta[:-1], intercept=float(beta[-1])
    )


# ------------------------------------------------------------------ gbdt


def fit_gbdt(X, y, spec: LearnerSpec | None = None, task: str = "regression",
             sample_weight=None) -> FittedLearner:
    from .gbdt import train_gbdt

    spec = spec or LearnerSpec(kind="gbdt")
    ensemble = train_gbdt(X, np.asarray(y, dtype=np.float64), spec.gbdt, task,
                          seed=spec.seed, sample_weight=sample_weight)
    M = _as_matrix(X)
    return FittedLearner(spec, task, _n_features(M), ensemble=ensemble)


# ------------------------------------------------------------- fit/predict


def fit(X, y, spec: LearnerSpec, task: str, sample_weight=None) -> FittedLearner:
    """Dispatch on spec.kind; classification requires binary y."""
    if spec.kind == "linear":
        return fit_linear(X, y, spec, sample_weight=sample_weight)
    if spec.kind == "logistic":
        if task != "binary-classification":
            raise ValueError("logistic learner only supports binary classification")
        if sample_weight is not None:
            raise ValueError("logistic learner does not support sample weights")
        return fit_logistic(X, y, spec)
    return fit_gbdt(X, y, spec, task=task, sample_weight=sample_weight)


def predict(model: FittedLearner, X) -> np.ndarray:
    """Raw values for regression, probabilities for classification."""
    M = _as_matrix(X)
    if M.shape[1] != model.n_features:
        raise ValueError(
            f"feature width mismatch: model has {model.n_features}, input has {M.shape[1]}"
        )
    if model.ensemble is not None:
        margin = model.ensemble.predict_margin(X)
        if model.task == "binary-classification":
            return np.clip(sigmoid(margin), 1e-12, 1 - 1e-12)
        return margin
    z = np.asarray(M @ model.coef).ravel() + model.intercept
    if model.task == "binary-classification":
        return np.clip(sigmoid(z), 1e-12, 1 - 1e-12)
    return z

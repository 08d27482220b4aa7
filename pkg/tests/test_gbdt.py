import json

import numpy as np
import pytest
from scipy import sparse

from textcausal.gbdt import BinnedDataset, Ensemble, train_gbdt
from textcausal.learners import GbdtParams, LearnerSpec, fit_gbdt, predict, sigmoid
from textcausal.tabular import FeatureMatrix


def walk_tree_oracle(tree_dict, x):
    """Independent routing oracle: follow x <= thr left, else right."""
    nid = 0
    while tree_dict["left"][nid] >= 0:
        j = tree_dict["feat"][nid]
        if x[j] <= tree_dict["thr"][nid]:
            nid = tree_dict["left"][nid]
        else:
            nid = tree_dict["right"][nid]
    return tree_dict["value"][nid]


def test_threshold_dataset_perfect_accuracy():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=200).reshape(-1, 1)
    y = (x[:, 0] > 0).astype(float)
    ens = train_gbdt(x, y, GbdtParams(), "binary-classification")
    pred = (sigmoid(ens.predict_margin(x)) > 0.5).astype(float)
    assert np.mean(pred == y) == 1.0


def test_zero_rounds_is_base_score():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 2))
    y = rng.normal(size=50)
    ens = train_gbdt(X, y, GbdtParams(n_rounds=0), "regression")
    np.testing.assert_allclose(ens.predict_margin(X), y.mean(), atol=1e-15)
    yb = (rng.random(50) < 0.3).astype(float)
    ensb = train_gbdt(X, yb, GbdtParams(n_rounds=0), "binary-classification")
    r = yb.mean()
    np.testing.assert_allclose(ensb.predict_margin(X), np.log(r / (1 - r)), atol=1e-12)


def test_training_loss_monotone_non_increasing():
    rng = np.random.default_rng(2)
    for trial in range(3):
        X = rng.normal(size=(120, 5))
        y = X[:, 0] - 2 * X[:, 1] + rng.normal(scale=0.5, size=120)
        ens = train_gbdt(
            X, y, GbdtParams(n_rounds=30, min_child_samples=5, subsample=1.0), "regression"
        )
        losses = np.array(ens.train_losses)
        assert np.all(np.diff(losses) <= 1e-12)
    yb = (rng.random(120) < sigmoid(X[:, 0])).astype(float)
    ensb = train_gbdt(
        X, yb, GbdtParams(n_rounds=30, min_child_samples=5), "binary-classification"
    )
    assert np.all(np.diff(np.array(ensb.train_losses)) <= 1e-12)


def test_determinism_byte_for_byte():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(150, 6))
    y = (rng.random(150) < sigmoid(X[:, 0])).astype(float)
    params = GbdtParams(n_rounds=10, subsample=0.7, colsample_bytree=0.5, min_child_samples=5)
    a = train_gbdt(X, y, params, "binary-classification", seed=9)
    b = train_gbdt(X, y, params, "binary-classification", seed=9)
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    c = train_gbdt(X, y, params, "binary-classification", seed=10)
    assert json.dumps(a.to_dict(), sort_keys=True) != json.dumps(c.to_dict(), sort_keys=True)


def test_prediction_matches_tree_walk_oracle():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(100, 4))
    y = X[:, 0] * X[:, 1] + rng.normal(scale=0.1, size=100)
    ens = train_gbdt(X, y, GbdtParams(n_rounds=8, min_child_samples=5), "regression")
    d = ens.to_dict()
    got = ens.predict_margin(X)
    for i in range(0, 100, 7):
        want = d["base_score"] + sum(walk_tree_oracle(t, X[i]) for t in d["trees"])
        assert got[i] == pytest.approx(want, abs=1e-12)


def test_min_child_constraints_respected():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(100, 2))
    y = rng.normal(size=100)
    ens = train_gbdt(
        X, y, GbdtParams(n_rounds=3, min_child_samples=40, num_leaves=31), "regression"
    )
    # with min_child_samples=40 on 100 rows at most 2 leaves fit per tree
    for t in ens.trees:
        n_leaves = sum(1 for v in t.left if v < 0)
        assert n_leaves <= 2


def test_too_few_rows_rejected():
    with pytest.raises(ValueError):
        train_gbdt(np.ones((10, 1)), np.ones(10), GbdtParams(min_child_samples=20), "regression")


def test_non_binary_classification_targets_rejected():
    with pytest.raises(ValueError):
        train_gbdt(
            np.ones((50, 1)), np.linspace(0, 2, 50), GbdtParams(min_child_samples=2),
            "binary-classification",
        )


def test_sample_weights_shift_base_and_fit():
    X = np.zeros((40, 1))
    y = np.concatenate([np.zeros(20), np.ones(20)])
    w = np.concatenate([np.ones(20) * 3.0, np.ones(20)])
    ens = train_gbdt(X, y, GbdtParams(n_rounds=0), "regression", sample_weight=w)
    assert ens.base_score == pytest.approx(20.0 / 80.0)


def test_feature_matrix_with_sparse_text_block():
    rng = np.random.default_rng(6)
    n = 200
    dense = rng.normal(size=(n, 2))
    text = sparse.random(n, 30, density=0.1, random_state=7, format="csr")
    fm = FeatureMatrix(dense, text.tocsr(), [f"f{j}" for j in range(32)])
    y = dense[:, 0] + np.asarray(text[:, 3].todense()).ravel() * 5
    ens = train_gbdt(fm, y, GbdtParams(n_rounds=20, min_child_samples=5), "regression")
    # same data densified must give identical predictions
    dens = fm.toarray()
    ens2 = train_gbdt(dens, y, GbdtParams(n_rounds=20, min_child_samples=5), "regression")
    np.testing.assert_allclose(ens.predict_margin(fm), ens2.predict_margin(dens), atol=1e-9)
    losses = np.array(ens.train_losses)
    assert np.all(np.diff(losses) <= 1e-12)


def test_binned_dataset_histogram_counts():
    X = np.array([[0.0], [0.0], [1.0], [2.0]])
    ds = BinnedDataset(X, max_bins=255)
    g = np.array([1.0, 2.0, 3.0, 4.0])
    h = np.ones(4)
    hg, hh, hc = ds.histogram(np.arange(4), g, h)
    assert hc.sum() == 4
    assert hg.sum() == pytest.approx(10.0)
    # three distinct values -> three bins for the single feature
    assert ds.nbins[0] == 3
    np.testing.assert_allclose(hc, [2.0, 1.0, 1.0])
    np.testing.assert_allclose(hg, [3.0, 3.0, 4.0])


def test_subsample_and_colsample_still_learn():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(300, 5))
    y = (X[:, 2] > 0).astype(float)
    ens = train_gbdt(
        X,
        y,
        GbdtParams(n_rounds=40, subsample=0.6, colsample_bytree=0.6, min_child_samples=10),
        "binary-classification",
        seed=1,
    )
    pred = (sigmoid(ens.predict_margin(X)) > 0.5).astype(float)
    assert np.mean(pred == y) > 0.95


def test_save_load_prediction_exact():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(80, 3))
    y = rng.normal(size=80)
    ens = train_gbdt(X, y, GbdtParams(n_rounds=6, min_child_samples=5), "regression")
    ens2 = Ensemble.from_dict(json.loads(json.dumps(ens.to_dict())))
    np.testing.assert_array_equal(ens2.predict_margin(X), ens.predict_margin(X))


def test_fit_gbdt_wrapper_predict_probabilities():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(100, 2))
    y = (X[:, 0] > 0).astype(float)
    m = fit_gbdt(X, y, LearnerSpec(kind="gbdt", gbdt=GbdtParams(n_rounds=10, min_child_samples=5)),
                 task="binary-classification")
    p = predict(m, X)
    assert np.all((p > 0) & (p < 1))
    assert np.mean((p > 0.5) == (y == 1)) == 1.0

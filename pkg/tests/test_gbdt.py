from __future__ import annotations

import numpy as np
import pytest

from horizon_cascade import gbdt
from horizon_cascade.errors import DataError, DegenerateClassError
from horizon_cascade.evaluation import auroc
from horizon_cascade.features import FeatureFrame
from horizon_cascade.gbdt import GbdtModel, TrainParams
from oracles import leaf_weight, weighted_log_loss


def frame(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    return FeatureFrame(np.array([f"r{i}" for i in range(n)], dtype=object), np.arange(n),
                        X, tuple(f"x{j}" for j in range(X.shape[1])), np.asarray(y, dtype=np.int8))


def random_frame(seed, n=150, f=4):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(n, f)), 1)
    y = (X[:, 0] - 0.5 * X[:, 1] + rng.normal(size=n) > 0.3).astype(np.int8)
    if y.all() or not y.any():
        y[0] = 1 - y[0]
    return frame(X, y)


def test_leaf_weights_closed_form():
    f = frame([1.0, 2.0, 3.0, 4.0], [0, 0, 1, 1])
    params = TrainParams(n_rounds=1, max_depth=1, learning_rate=1.0, reg_lambda=1.0, min_child_weight=0.0)
    tree = gbdt.fit(f, params).trees[0]
    assert tree.feature[0] == 0 and tree.threshold[0] == 2.5
    g = [0.5, 0.5, -0.5, -0.5]
    h = [0.25] * 4
    left, right = tree.value[tree.left[0]], tree.value[tree.right[0]]
    assert abs(left - leaf_weight(g[:2], h[:2], 1.0)) <= 1e-12
    assert abs(right - leaf_weight(g[2:], h[2:], 1.0)) <= 1e-12


def test_loss_trace_matches_direct_formula():
    f = random_frame(3)
    model = gbdt.fit(f, TrainParams(n_rounds=10, max_depth=2))
    p = gbdt.predict_proba(model, f)
    assert np.isclose(model.train_loss[-1], weighted_log_loss(f.target, p, np.ones(len(f))), rtol=1e-12)


def test_loss_non_increasing_over_200_rounds():
    params = TrainParams(n_rounds=200, max_depth=3, learning_rate=0.1, gamma=0.0)
    for seed in range(20):
        losses = np.asarray(gbdt.fit(random_frame(seed), params).train_loss)
        assert np.all(np.diff(losses) <= 1e-12), seed


def test_separable_toy_reaches_auc_one():
    x = np.linspace(-1, 1, 40)
    f = frame(x, (x > 0.1).astype(int))
    model = gbdt.fit(f, TrainParams(n_rounds=20, max_depth=1))
    assert auroc(gbdt.predict_proba(model, f), f.target) == 1.0


def test_integer_weights_equal_duplicated_rows():
    f = random_frame(11, n=60)
    w = np.random.default_rng(0).integers(0, 4, size=60).astype(float)
    w[np.flatnonzero(f.target == 1)[0]] = 1
    w[np.flatnonzero(f.target == 0)[0]] = 1
    params = TrainParams(n_rounds=5, max_depth=2)
    weighted = gbdt.fit(f, params, sample_weight=w)
    dup = f.take(np.repeat(np.arange(60), w.astype(int)))
    plain = gbdt.fit(dup, params)
    probe = random_frame(12, n=30)
    assert np.allclose(gbdt.predict_proba(weighted, probe), gbdt.predict_proba(plain, probe), rtol=1e-10, atol=1e-12)


def test_gamma_and_min_child_weight_prune():
    f = random_frame(5)
    assert gbdt.fit(f, TrainParams(n_rounds=3, gamma=1e9)).trees[0].n_nodes == 1
    assert gbdt.fit(f, TrainParams(n_rounds=3, min_child_weight=1e9)).trees[0].n_nodes == 1


def test_depth_is_respected():
    model = gbdt.fit(random_frame(6), TrainParams(n_rounds=5, max_depth=2))
    assert max(t.depth() for t in model.trees) <= 2


def test_save_load_round_trip(tmp_path):
    f = random_frame(8)
    model = gbdt.fit(f, TrainParams(n_rounds=8))
    model.save(tmp_path / "m.json")
    back = GbdtModel.load(tmp_path / "m.json")
    assert np.array_equal(gbdt.predict_proba(model, f), gbdt.predict_proba(back, f))


def test_predictions_stay_inside_unit_interval():
    f = frame(np.arange(10.0), [0] * 5 + [1] * 5)
    model = gbdt.fit(f, TrainParams(n_rounds=200, learning_rate=1.0, reg_lambda=0.0))
    p = gbdt.predict_proba(model, f)
    assert np.all((p > 0) & (p < 1))


def test_gain_importance_prefers_signal():
    f = random_frame(9)
    gains = gbdt.gain_importance(gbdt.fit(f, TrainParams(n_rounds=20, max_depth=2)))
    assert max(gains, key=gains.get) == "x0"


def test_fit_errors():
    with pytest.raises(DegenerateClassError):
        gbdt.fit(frame([1.0, 2.0], [1, 1]))
    with pytest.raises(DataError):
        gbdt.fit(frame([1.0, np.nan], [0, 1]))
    with pytest.raises(DataError):
        gbdt.fit(frame([1.0, 2.0], [0, -1]))
    model = gbdt.fit(frame([1.0, 2.0], [0, 1]), TrainParams(n_rounds=1))
    with pytest.raises(DataError):
        gbdt.predict_matrix(model, np.zeros((2, 3)))

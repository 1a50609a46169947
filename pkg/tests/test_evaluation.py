from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from horizon_cascade.errors import ConfigError, DataError, DegenerateClassError
from horizon_cascade.evaluation import auroc, roc_curve, sensitivity_specificity, stratified_patient_folds
from oracles import mann_whitney_auc


def test_auroc_matches_pair_count_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 51))
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 0, 1
        s = rng.integers(0, 6, size=n) / 5.0  # heavy ties
        assert abs(auroc(s, y) - mann_whitney_auc(s, y)) <= 1e-9


@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=2, max_size=40))
def test_auroc_property(pairs):
    s = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    if len(set(y)) < 2:
        with pytest.raises(DegenerateClassError):
            auroc(s, y)
        return
    assert abs(auroc(s, y) - mann_whitney_auc(s, y)) <= 1e-9


def test_roc_curve_endpoints():
    fpr, tpr, thr = roc_curve([0.9, 0.4, 0.4, 0.1], [1, 0, 1, 0])
    assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0.0, 0.0, 1.0, 1.0)
    assert np.isinf(thr[0]) and len(thr) == 4


def test_sensitivity_specificity_by_hand():
    sens, spec, c = sensitivity_specificity([0.9, 0.5, 0.2, 0.7], [1, 1, 0, 0], threshold=0.5)
    assert (c.tp, c.fn, c.tn, c.fp) == (2, 0, 1, 1)
    assert sens == 1.0 and spec == 0.5


def test_metric_input_errors():
    with pytest.raises(DataError):
        auroc([0.1, 0.2], [0, 2])
    with pytest.raises(DataError):
        auroc([0.1], [0, 1])


def test_folds_partition_and_stratify():
    ids = [f"p{i}" for i in range(53)]
    events = [i % 5 == 0 for i in range(53)]
    folds = stratified_patient_folds(ids, events, 5, seed=1)
    flat = [p for f in folds for p in f]
    assert sorted(flat) == sorted(ids)
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    per_fold = [sum(events[int(p[1:])] for p in f) for f in folds]
    assert max(per_fold) - min(per_fold) <= 1
    assert folds == stratified_patient_folds(ids, events, 5, seed=1)
    with pytest.raises(ConfigError):
        stratified_patient_folds(ids, events, 1, seed=0)

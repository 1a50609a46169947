from __future__ import annotations

import numpy as np
import pytest

from horizon_cascade.cascade import (
    CascadeSpec,
    FitCache,
    load_cascade,
    mode_for_subsets,
    out_of_fold_probs,
    predict_cascade,
    save_cascade,
    train_cascade,
)
from horizon_cascade.errors import ConfigError, DataError, DegenerateClassError
from horizon_cascade.evaluation import cross_validate
from horizon_cascade.features import WindowSpec, build_hourly_table
from horizon_cascade.gbdt import TrainParams
from horizon_cascade.pipeline import prepare_cohort
from horizon_cascade.synth import SynthConfig, generate_cohort

FAST = TrainParams(n_rounds=8, max_depth=2, learning_rate=0.3, min_child_weight=5)


@pytest.fixture(scope="module")
def cohort():
    cfg = SynthConfig(n_patients=80, event_rate=0.3, stay_hours=(30, 48), onset_day_range=(2, 2), seed=4)
    return prepare_cohort(generate_cohort(cfg), groups="g1,g2").cohort


def spec(mode="two_subsets", **kw):
    return CascadeSpec(mode=mode, params=FAST, oof_folds=3, **kw)


def test_spec_validation():
    assert CascadeSpec(mode="six_subsets").intermediate_horizons == [1, 2, 3, 4, 5]
    assert CascadeSpec(mode="two_subsets").intermediate_horizons == [3]
    assert CascadeSpec(mode="one_subset").intermediate_horizons == []
    assert mode_for_subsets(6) == "six_subsets"
    for bad in (dict(mode="three"), dict(target_horizon=1), dict(leakage_control="none"), dict(oof_folds=1)):
        with pytest.raises(ConfigError):
            CascadeSpec(**bad)
    with pytest.raises(ConfigError):
        mode_for_subsets(3)
    s = spec(seed=9)
    assert CascadeSpec.from_json(s.to_json()) == s


def test_target_columns(cohort):
    six = train_cascade(cohort, spec("six_subsets"))
    assert six.target_features[-5:] == tuple(f"subset_prob_{h}hr" for h in range(1, 6))
    one = train_cascade(cohort, spec("one_subset"))
    assert one.target_features == one.base_columns


def test_oof_has_no_leakage_and_insample_does(cohort):
    model = train_cascade(cohort, spec("six_subsets"))
    assert all(r.leakage_violations() == 0 for r in model.provenance.values())
    leaky = train_cascade(cohort, spec("six_subsets", leakage_control="insample"))
    assert all(r.leakage_violations() == len(r.probs) for r in leaky.provenance.values())


def test_out_of_fold_probs_provenance(cohort):
    result = out_of_fold_probs(cohort, 3, spec(), k=4)
    assert len(result.train_patients) == 4 and result.leakage_violations() == 0
    assert np.all((result.probs > 0) & (result.probs < 1))


def test_save_load_predict(tmp_path, cohort):
    model = train_cascade(cohort, spec())
    save_cascade(model, tmp_path / "m")
    back = load_cascade(tmp_path / "m")
    a, b = predict_cascade(model, cohort), predict_cascade(back, cohort)
    assert np.array_equal(a.probs, b.probs)
    with pytest.raises(DataError):
        load_cascade(tmp_path / "missing")


def test_training_is_seeded(cohort):
    a = predict_cascade(train_cascade(cohort, spec(seed=1)), cohort).probs
    b = predict_cascade(train_cascade(cohort, spec(seed=1)), cohort).probs
    c = predict_cascade(train_cascade(cohort, spec(seed=2)), cohort).probs
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_fit_cache_reuses_shared_models(cohort):
    table = build_hourly_table(cohort, WindowSpec())
    cache = FitCache()
    six = cross_validate(cohort, spec("six_subsets"), k=3, table=table, cache=cache)
    fitted = len(cache)
    two = cross_validate(cohort, spec("two_subsets"), k=3, table=table, cache=cache)
    assert cache.hits > 0 and len(cache) == fitted + 3  # only the three target models are new
    plain = cross_validate(cohort, spec("two_subsets"), k=3, table=table)
    assert two.dumps() == plain.dumps()
    assert six.mean_auroc > 0.5


def test_cv_threads_do_not_change_results(cohort):
    a = cross_validate(cohort, spec(), k=3, threads=1)
    b = cross_validate(cohort, spec(), k=3, threads=3)
    assert a.dumps() == b.dumps()


def test_cv_needs_enough_events(cohort):
    with pytest.raises(DegenerateClassError):
        cross_validate(cohort, spec(), k=500)

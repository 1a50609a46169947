from __future__ import annotations

import numpy as np
import pytest

from horizon_cascade.cohort import Cohort, Column, FeatureSchema, PatientSeries
from horizon_cascade.labeling import LabelTrack

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str = "") -> str:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def make_series(pid, values, labels, start_hour=0, observed=None):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if observed is None:
        observed = ~np.isnan(values)
    return PatientSeries(pid, start_hour, values, observed, LabelTrack(np.asarray(labels)))


@pytest.fixture
def two_column_schema():
    return FeatureSchema((Column("hr", "G1", True), Column("age", "G2")))


@pytest.fixture
def small_cohort(two_column_schema):
    """Six patients across days 1-3; two have an onset."""
    rng = np.random.default_rng(7)
    patients = []
    for i in range(6):
        t = 60
        hr = 80 + np.cumsum(rng.normal(size=t))
        age = np.full(t, 50.0 + i)
        labels = np.zeros(t, dtype=np.int8)
        if i < 2:
            labels[40 + i:] = 1
        patients.append(make_series(f"p{i}", np.column_stack([hr, age]), labels))
    return Cohort(two_column_schema, tuple(patients))

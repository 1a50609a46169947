"""Design-matrix construction: raw values, hourly deltas, trailing-window statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import kernels
from .cohort import Cohort, PatientSeries
from .errors import ConfigError, DataError
from .labeling import UNKNOWN

STAT_NAMES = ("mean", "min", "max", "std", "skew", "kurt")
FEATURE_FLAGS = ("baseline", "delta", "stats", "delta+stats")


def subset_prob_name(h: int) -> str:
    return f"subset_prob_{h}hr"


@dataclass(frozen=True)
class WindowSpec:
    w: int = 6
    enable_delta: bool = True
    enable_stats: bool = True

    def __post_init__(self):
        if int(self.w) < 1:
            raise ConfigError(f"window length must be >= 1, got {self.w}")

    @classmethod
    def from_flag(cls, flag: str, w: int = 6) -> "WindowSpec":
        if flag not in FEATURE_FLAGS:
            raise ConfigError(f"feature flag must be one of {FEATURE_FLAGS}, got {flag!r}")
        return cls(w, enable_delta="delta" in flag, enable_stats="stats" in flag)

    @property
    def flag(self) -> str:
        parts = [p for p, on in (("delta", self.enable_delta), ("stats", self.enable_stats)) if on]
        return "+".join(parts) or "baseline"


@dataclass(frozen=True, eq=False)
class FeatureFrame:
    """Rows keyed by (patient_id, hour), named float columns, 0/1 target.

    ``target`` may hold -1 in frames that cover hours without a known label;
    learners reject such frames.
    """

    patient_ids: np.ndarray
    hours: np.ndarray
    X: np.ndarray
    columns: tuple[str, ...]
    target: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        n = len(self.patient_ids)
        if X.ndim != 2 or X.shape != (n, len(self.columns)):
            raise DataError(f"frame matrix shape {X.shape} does not match {n} rows x {len(self.columns)} columns")
        if len(self.hours) != n or len(self.target) != n:
            raise DataError("frame row keys and target must have one entry per row")
        if len(set(self.columns)) != len(self.columns):
            raise DataError("frame column names must be unique")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "patient_ids", np.asarray(self.patient_ids, dtype=object))
        object.__setattr__(self, "hours", np.asarray(self.hours, dtype=np.int64))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=np.int8))

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def rows(self) -> list[tuple[str, int]]:
        return list(zip(self.patient_ids.tolist(), self.hours.tolist()))

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.columns.index(name)]

    def take(self, idx) -> "FeatureFrame":
        return FeatureFrame(self.patient_ids[idx], self.hours[idx], self.X[idx], self.columns, self.target[idx])

    def with_columns(self, names, values: np.ndarray) -> "FeatureFrame":
        values = np.asarray(values, dtype=np.float64).reshape(len(self), -1)
        return FeatureFrame(
            self.patient_ids, self.hours, np.hstack([self.X, values]), (*self.columns, *names), self.target
        )

    def select_columns(self, names) -> "FeatureFrame":
        idx = [self.columns.index(n) for n in names]
        return FeatureFrame(self.patient_ids, self.hours, self.X[:, idx], tuple(names), self.target)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["patient_id", "hour", "target", *self.columns])
            for pid, hour, y, row in zip(self.patient_ids, self.hours, self.target, self.X):
                writer.writerow([pid, int(hour), int(y), *(repr(float(v)) for v in row)])


@dataclass(frozen=True, eq=False)
class NamedColumns:
    """Extra columns keyed by the same (patient_id, hour) rows as a frame."""

    patient_ids: np.ndarray
    hours: np.ndarray
    columns: Mapping[str, np.ndarray]


def _require_imputed(series: PatientSeries) -> None:
    if np.isnan(series.values).any():
        raise DataError(f"patient {series.patient_id}: impute before computing trend features")


def _trendable_index(series_columns: list[str], trendable: list[str]) -> list[int]:
    return [series_columns.index(n) for n in trendable]


def delta_features(series: PatientSeries, spec: WindowSpec, schema) -> dict[str, np.ndarray]:
    """``<f>_delta`` = x[t] - x[t-1] per trendable column; 0 on the first row."""
    _require_imputed(series)
    out = {}
    for name, j in zip(schema.trendable, _trendable_index(schema.names, schema.trendable)):
        col = series.values[:, j]
        d = np.empty_like(col)
        d[0] = 0.0
        d[1:] = col[1:] - col[:-1]
        out[f"{name}_delta"] = d
    return out


def window_stats(series: PatientSeries, spec: WindowSpec, schema) -> dict[str, np.ndarray]:
    """Six trailing-window statistics per trendable column over ``w + 1`` samples.

    Near the start of a series the window shrinks to the available prefix.
    """
    _require_imputed(series)
    out = {}
    for name, j in zip(schema.trendable, _trendable_index(schema.names, schema.trendable)):
        m = kernels.rolling_moments(np.ascontiguousarray(series.values[:, j]), int(spec.w))
        for k, stat in enumerate(STAT_NAMES):
            out[f"{name}_{stat}"] = m[:, k]
    return out


def engineered_columns(schema, spec: WindowSpec) -> list[str]:
    cols = list(schema.names)
    if spec.enable_delta:
        cols += [f"{n}_delta" for n in schema.trendable]
    if spec.enable_stats:
        cols += [f"{n}_{s}" for n in schema.trendable for s in STAT_NAMES]
    return cols


def _patient_matrix(series: PatientSeries, spec: WindowSpec, schema) -> np.ndarray:
    blocks = [series.values]
    if spec.enable_delta:
        blocks.append(np.column_stack(list(delta_features(series, spec, schema).values()) or [np.empty((series.n_hours, 0))]))
    if spec.enable_stats:
        blocks.append(np.column_stack(list(window_stats(series, spec, schema).values()) or [np.empty((series.n_hours, 0))]))
    return np.hstack(blocks)


@dataclass(frozen=True, eq=False)
class HourlyTable:
    """Engineered features for every hour of every patient, before any horizon shift.

    Rows of one patient are contiguous and in hour order, so the label ``h``
    hours ahead of row ``i`` is ``onset[i + h]`` whenever ``offset[i] + h`` is
    still inside the series.
    """

    frame: FeatureFrame
    offset: np.ndarray
    length: np.ndarray

    @property
    def onset(self) -> np.ndarray:
        return self.frame.target

    def targets(self, h: int) -> np.ndarray:
        y = np.full(len(self.frame), UNKNOWN, dtype=np.int8)
        ok = self.offset + h < self.length
        y[ok] = self.onset[np.flatnonzero(ok) + h]
        return y

    def horizon_index(self, h: int) -> np.ndarray:
        """Rows with a known label ``h`` hours ahead."""
        return np.flatnonzero(self.targets(h) != UNKNOWN)

    def horizon_frame(self, h: int) -> FeatureFrame:
        y = self.targets(h)
        idx = np.flatnonzero(y != UNKNOWN)
        f = self.frame
        return FeatureFrame(f.patient_ids[idx], f.hours[idx], f.X[idx], f.columns, y[idx])

    def for_patients(self, patient_ids) -> "HourlyTable":
        keep = np.isin(self.frame.patient_ids, np.asarray(list(patient_ids), dtype=object))
        idx = np.flatnonzero(keep)
        return HourlyTable(self.frame.take(idx), self.offset[idx], self.length[idx])


def build_hourly_table(cohort: Cohort, spec: WindowSpec) -> HourlyTable:
    schema = cohort.schema
    if (spec.enable_delta or spec.enable_stats) and not schema.trendable:
        raise ConfigError("delta/stats features requested but no trendable columns are selected")
    mats, pids, hours, onset, offset, length = [], [], [], [], [], []
    for p in cohort.patients:
        mats.append(_patient_matrix(p, spec, schema))
        t = p.n_hours
        pids.append(np.full(t, p.patient_id, dtype=object))
        hours.append(p.hours)
        onset.append(p.labels.onset)
        offset.append(np.arange(t))
        length.append(np.full(t, t))
    columns = tuple(engineered_columns(schema, spec))
    if not mats:
        empty = np.empty(0)
        frame = FeatureFrame(np.empty(0, dtype=object), empty.astype(np.int64), np.empty((0, len(columns))), columns, empty.astype(np.int8))
        return HourlyTable(frame, empty.astype(np.int64), empty.astype(np.int64))
    frame = FeatureFrame(
        np.concatenate(pids), np.concatenate(hours), np.vstack(mats), columns, np.concatenate(onset)
    )
    return HourlyTable(frame, np.concatenate(offset), np.concatenate(length))


def assemble_design_matrix(
    cohort: Cohort, spec: WindowSpec, extra_columns: NamedColumns | None = None
) -> FeatureFrame:
    """One row per (patient, hour) with a known shifted label.

    Every patient's ``LabelTrack`` must already be shifted to the same
    horizon. Extra columns (cascade probabilities) are appended last and must
    cover exactly the frame's rows in order.
    """
    horizons = {p.labels.horizon for p in cohort.patients}
    if None in horizons:
        raise DataError("shift labels to the target horizon before assembling the design matrix")
    if len(horizons) > 1:
        raise DataError(f"patients are shifted to different horizons: {sorted(horizons)}")
    table = build_hourly_table(cohort, spec)
    frame = table.horizon_frame(horizons.pop()) if horizons else table.frame
    if extra_columns is None or not extra_columns.columns:
        return frame
    same_rows = len(extra_columns.patient_ids) == len(frame) and (
        np.array_equal(np.asarray(extra_columns.patient_ids, dtype=object), frame.patient_ids)
        and np.array_equal(np.asarray(extra_columns.hours), frame.hours)
    )
    if not same_rows:
        raise DataError("extra columns are not aligned with the design matrix rows")
    names = list(extra_columns.columns)
    return frame.with_columns(names, np.column_stack([extra_columns.columns[n] for n in names]))

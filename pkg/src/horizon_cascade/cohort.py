"""Hourly cohort data: schema, per-patient matrices, CSV I/O and imputation."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, DataError
from .labeling import UNKNOWN, LabelTrack

GROUPS = ("G1", "G2", "G3", "G4")
ID_COLUMNS = ("patient_id", "hour", "label")


def parse_groups(groups: Iterable[str] | str) -> frozenset[str]:
    """Accept ``{"G1", "g2"}`` or ``"g1,g2"``."""
    if isinstance(groups, str):
        groups = [g for g in groups.split(",") if g.strip()]
    out = frozenset(g.strip().upper() for g in groups)
    unknown = out - set(GROUPS)
    if unknown:
        raise ConfigError(f"unknown feature groups: {sorted(unknown)}")
    return out


@dataclass(frozen=True)
class Column:
    name: str
    group: str
    trendable: bool = False


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        seen = set()
        for col in self.columns:
            if not col.name or not col.name.strip():
                raise ConfigError("schema column names must be non-empty")
            if col.name in seen:
                raise ConfigError(f"duplicate schema column {col.name!r}")
            if col.name in ID_COLUMNS:
                raise ConfigError(f"schema column may not be named {col.name!r}")
            if col.group not in GROUPS:
                raise ConfigError(f"column {col.name!r} has unknown group {col.group!r}")
            seen.add(col.name)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def trendable(self) -> list[str]:
        return [c.name for c in self.columns if c.trendable]

    def __len__(self) -> int:
        return len(self.columns)

    def to_json(self) -> list[dict]:
        return [{"name": c.name, "group": c.group, "trendable": c.trendable} for c in self.columns]

    @classmethod
    def from_json(cls, doc: list[dict]) -> "FeatureSchema":
        try:
            return cls(tuple(Column(d["name"], d["group"].upper(), bool(d.get("trendable", False))) for d in doc))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ConfigError(f"malformed schema document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read schema {path}: {exc}") from exc
        return cls.from_json(doc)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PatientSeries:
    """One patient's consecutive hourly rows.

    ``values`` is ``t x f`` with NaN wherever nothing is known yet; after
    imputation it is fully populated while ``observed_mask`` still records
    which cells were measured.
    """

    patient_id: str
    start_hour: int
    values: np.ndarray
    observed_mask: np.ndarray
    labels: LabelTrack

    def __post_init__(self):
        values = _frozen(np.array(self.values, dtype=np.float64))
        mask = _frozen(np.array(self.observed_mask, dtype=bool))
        if values.ndim != 2 or values.shape[0] < 1:
            raise DataError(f"patient {self.patient_id}: values must be a non-empty t x f matrix")
        if mask.shape != values.shape:
            raise DataError(f"patient {self.patient_id}: observed_mask shape {mask.shape} != values {values.shape}")
        if len(self.labels) != values.shape[0]:
            raise DataError(f"patient {self.patient_id}: label track length differs from row count")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed_mask", mask)

    @property
    def n_hours(self) -> int:
        return self.values.shape[0]

    @property
    def hours(self) -> np.ndarray:
        return np.arange(self.start_hour, self.start_hour + self.n_hours)

    def take(self, rows: slice) -> "PatientSeries":
        start, stop, step = rows.indices(self.n_hours)
        if step != 1:
            raise ValueError("only contiguous row ranges keep a series hourly")
        return PatientSeries(
            self.patient_id,
            self.start_hour + start,
            self.values[rows],
            self.observed_mask[rows],
            self.labels.take(rows),
        )


@dataclass(frozen=True, eq=False)
class Cohort:
    schema: FeatureSchema
    patients: tuple[PatientSeries, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "patients", tuple(self.patients))
        ids = set()
        f = len(self.schema)
        for p in self.patients:
            if p.patient_id in ids:
                raise DataError(f"duplicate patient_id {p.patient_id!r}")
            if p.values.shape[1] != f:
                raise DataError(f"patient {p.patient_id}: {p.values.shape[1]} columns, schema has {f}")
            ids.add(p.patient_id)

    def __len__(self) -> int:
        return len(self.patients)

    @property
    def patient_ids(self) -> list[str]:
        return [p.patient_id for p in self.patients]

    @property
    def n_rows(self) -> int:
        return sum(p.n_hours for p in self.patients)

    def is_imputed(self) -> bool:
        return all(not np.isnan(p.values).any() for p in self.patients)

    def subset(self, patient_ids: Iterable[str]) -> "Cohort":
        keep = set(patient_ids)
        return Cohort(self.schema, tuple(p for p in self.patients if p.patient_id in keep))

    def map(self, fn) -> "Cohort":
        return Cohort(self.schema, tuple(fn(p) for p in self.patients))


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"line {line}: non-numeric value {text!r} in column {column!r}") from None
    if not math.isfinite(v):
        raise DataError(f"line {line}: non-finite value {text!r} in column {column!r}")
    return v


def ingest_csv(path: str | Path, schema: FeatureSchema) -> Cohort:
    """Read a ``patient_id,hour,label,<features...>`` file into a cohort.

    Hours missing inside a patient's span become all-missing rows with unknown
    label. Empty cells are recorded as unobserved.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"cohort file not found: {path}")
    names = schema.names
    rows_by_patient: dict[str, dict[int, tuple[int, list[float]]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        expected = set(ID_COLUMNS) | set(names)
        if len(header) != len(set(header)) or set(header) != expected:
            missing = sorted(expected - set(header))
            extra = sorted(set(header) - expected)
            raise DataError(f"line 1: header does not match schema (missing {missing}, unexpected {extra})")
        where = {h: i for i, h in enumerate(header)}
        feat_idx = [where[n] for n in names]
        i_pid, i_hour, i_label = where["patient_id"], where["hour"], where["label"]
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"line {line}: expected {len(header)} fields, got {len(row)}")
            pid = row[i_pid].strip()
            if not pid:
                raise DataError(f"line {line}: empty patient_id")
            try:
                hour = int(row[i_hour])
            except ValueError:
                raise DataError(f"line {line}: hour {row[i_hour]!r} is not an integer") from None
            label_text = row[i_label].strip()
            if label_text == "":
                label = UNKNOWN
            elif label_text in ("0", "1"):
                label = int(label_text)
            else:
                raise DataError(f"line {line}: label must be 0, 1 or empty, got {label_text!r}")
            values = [
                math.nan if row[j].strip() == "" else _parse_float(row[j], line, names[k])
                for k, j in enumerate(feat_idx)
            ]
            hours = rows_by_patient.setdefault(pid, {})
            if hour in hours:
                raise DataError(f"line {line}: duplicate row for patient {pid!r} hour {hour}")
            hours[hour] = (label, values)

    patients = []
    f = len(names)
    for pid, hours in rows_by_patient.items():
        first, last = min(hours), max(hours)
        t = last - first + 1
        values = np.full((t, f), np.nan)
        onset = np.full(t, UNKNOWN, dtype=np.int8)
        for hour, (label, vals) in hours.items():
            values[hour - first] = vals
            onset[hour - first] = label
        patients.append(PatientSeries(pid, first, values, ~np.isnan(values), LabelTrack(onset)))
    return Cohort(schema, tuple(patients))


def write_csv(cohort: Cohort, path: str | Path) -> None:
    """Write observed cells only; hours with nothing observed and no label are skipped."""
    names = cohort.schema.names
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*ID_COLUMNS, *names])
        for p in cohort.patients:
            onset = p.labels.onset
            for i in range(p.n_hours):
                observed = p.observed_mask[i]
                if onset[i] == UNKNOWN and not observed.any():
                    continue
                cells = [repr(float(v)) if o else "" for v, o in zip(p.values[i], observed)]
                label = "" if onset[i] == UNKNOWN else str(int(onset[i]))
                writer.writerow([p.patient_id, p.start_hour + i, label, *cells])


def observed_medians(cohort: Cohort) -> np.ndarray:
    """Per-column median of observed cells across the cohort."""
    f = len(cohort.schema)
    if not cohort.patients:
        raise DataError("cohort has no patients")
    stacked = np.concatenate([p.values for p in cohort.patients])
    mask = np.concatenate([p.observed_mask for p in cohort.patients])
    medians = np.empty(f)
    for j, name in enumerate(cohort.schema.names):
        seen = stacked[mask[:, j], j]
        if seen.size == 0:
            raise DataError(f"column {name!r} is never observed in the cohort")
        medians[j] = np.median(seen)
    return medians


def forward_fill(values: np.ndarray, observed: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Carry each column's last observed value forward; leading gaps get ``fallback``."""
    t = values.shape[0]
    last = np.where(observed, np.arange(t)[:, None], -1)
    np.maximum.accumulate(last, axis=0, out=last)
    cols = np.arange(values.shape[1])
    filled = values[np.maximum(last, 0), cols]
    return np.where(last >= 0, filled, fallback[None, :])


def carry_forward_impute(cohort: Cohort, medians: np.ndarray | None = None) -> Cohort:
    """Fill gaps by carry-forward; cells before a column's first observation take the cohort median."""
    if medians is None:
        medians = observed_medians(cohort)
    return cohort.map(
        lambda p: replace(p, values=forward_fill(p.values, p.observed_mask, medians))
    )


def select_groups(cohort: Cohort, groups: Iterable[str] | str) -> Cohort:
    groups = parse_groups(groups)
    if not groups:
        raise ConfigError("at least one feature group is required")
    keep = [j for j, c in enumerate(cohort.schema.columns) if c.group in groups]
    if not keep:
        raise ConfigError(f"no schema columns belong to groups {sorted(groups)}")
    if len(keep) == len(cohort.schema):
        return cohort
    schema = FeatureSchema(tuple(cohort.schema.columns[j] for j in keep))
    return Cohort(
        schema,
        tuple(
            replace(p, values=p.values[:, keep], observed_mask=p.observed_mask[:, keep])
            for p in cohort.patients
        ),
    )

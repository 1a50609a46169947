"""Discrimination metrics and patient-level cross-validation."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DegenerateClassError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _check_binary(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be 1-D and of equal length")
    if not np.isin(labels, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    if not (labels == 1).any() or not (labels == 0).any():
        raise DegenerateClassError("metric needs both classes present")
    return scores, labels.astype(np.int8)


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ROC points ``(fpr, tpr, threshold)`` from (0, 0) at threshold +inf.

    One point per distinct score, so tied scores move both rates at once.
    """
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    last_of_run = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tps = np.cumsum(y)[last_of_run]
    fps = (last_of_run + 1) - tps
    tpr = np.r_[0.0, tps / tps[-1]]
    fpr = np.r_[0.0, fps / fps[-1]]
    thresholds = np.r_[np.inf, s[last_of_run]]
    return fpr, tpr, thresholds


def auroc(scores, labels) -> float:
    """Trapezoidal area under the ROC curve (ties earn half credit)."""
    fpr, tpr, _ = roc_curve(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))


def sensitivity_specificity(scores, labels, threshold: float = 0.5) -> tuple[float, float, ConfusionCounts]:
    """Predict positive when ``score >= threshold``; return TP/(TP+FN), TN/(FP+TN) and the counts."""
    scores, labels = _check_binary(scores, labels)
    pred = scores >= threshold
    pos = labels == 1
    counts = ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )
    return counts.tp / (counts.tp + counts.fn), counts.tn / (counts.fp + counts.tn), counts


def stratified_patient_folds(patient_ids, has_event, k: int, seed) -> list[list[str]]:
    """Deal patients into ``k`` folds, shuffling events and non-events separately.

    Events go round-robin from fold 0, non-events continue where events left
    off so fold sizes stay within one of each other.
    """
    if k < 2:
        raise ConfigError(f"need at least 2 folds, got {k}")
    ids = np.asarray(list(patient_ids), dtype=object)
    has_event = np.asarray(has_event, dtype=bool)
    rng = np.random.default_rng(seed)
    folds: list[list[str]] = [[] for _ in range(k)]
    cursor = 0
    for stratum in (ids[has_event], ids[~has_event]):
        for pid in rng.permutation(stratum):
            folds[cursor % k].append(str(pid))
            cursor += 1
    return folds


@dataclass
class FoldResult:
    fold: int
    auroc: float
    sensitivity: float
    specificity: float
    counts: ConfusionCounts
    n_patients: int
    roc_points: list[tuple[float, float, float]] = field(repr=False)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["counts"] = asdict(self.counts)
        doc["roc_points"] = [[f, t, _json_float(th)] for f, t, th in self.roc_points]
        return doc


def _json_float(v: float):
    return "inf" if np.isinf(v) else v


@dataclass
class EvalReport:
    per_fold: list[FoldResult]
    config: dict
    seed: int
    notes: list[str] = field(default_factory=list)

    @property
    def mean_auroc(self) -> float:
        return float(np.mean([f.auroc for f in self.per_fold]))

    @property
    def mean_sensitivity(self) -> float:
        return float(np.mean([f.sensitivity for f in self.per_fold]))

    @property
    def mean_specificity(self) -> float:
        return float(np.mean([f.specificity for f in self.per_fold]))

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "mean_auroc": self.mean_auroc,
            "mean_sensitivity": self.mean_sensitivity,
            "mean_specificity": self.mean_specificity,
            "per_fold": [f.to_json() for f in self.per_fold],
            "notes": list(self.notes),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    def write_roc_csv(self, directory: str | Path) -> list[Path]:
        """One ``roc_fold<k>.csv`` (``fpr,tpr,threshold``) per fold."""
        paths = []
        for f in self.per_fold:
            path = Path(directory) / f"roc_fold{f.fold}.csv"
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["fpr", "tpr", "threshold"])
                for fpr, tpr, th in f.roc_points:
                    writer.writerow([repr(float(fpr)), repr(float(tpr)), repr(float(th))])
            paths.append(path)
        return paths


def evaluate_fold(fold: int, scores, labels, threshold: float, n_patients: int) -> FoldResult:
    sens, spec, counts = sensitivity_specificity(scores, labels, threshold)
    fpr, tpr, thr = roc_curve(scores, labels)
    return FoldResult(
        fold=fold,
        auroc=auroc(scores, labels),
        sensitivity=sens,
        specificity=spec,
        counts=counts,
        n_patients=n_patients,
        roc_points=[(float(a), float(b), float(c)) for a, b, c in zip(fpr, tpr, thr)],
    )


def cross_validate(
    cohort, spec, k: int = 5, threshold: float = 0.5, threads: int = 1, table=None, cache=None
) -> EvalReport:
    """Patient-level stratified k-fold CV of a cascade.

    ``cohort`` must already be filtered and imputed. Each fold trains on the
    other ``k - 1`` folds (resampling only those rows) and scores the held-out
    patients' target-horizon rows untouched. Folds run on up to ``threads``
    workers; results do not depend on the worker count. ``cache`` (a
    ``FitCache``) lets repeated runs on the same cohort reuse fitted models.
    """
    from .cascade import cascade_fold_seed, predict_on_table, train_on_table
    from .features import build_hourly_table

    if table is None:
        table = build_hourly_table(cohort, spec.window)
    h = spec.target_horizon
    y_target = table.targets(h)
    pids = table.frame.patient_ids
    patient_order = list(dict.fromkeys(pids.tolist()))
    event_ids = set(pids[y_target == 1].tolist())
    has_event = [p in event_ids for p in patient_order]
    if sum(has_event) < k:
        raise DegenerateClassError(
            f"stratified {k}-fold CV needs at least {k} patients with a positive {h}h target, found {sum(has_event)}"
        )
    folds = stratified_patient_folds(patient_order, has_event, k, seed=[spec.seed, 0xF01D])

    def run_fold(i: int) -> FoldResult:
        test_ids = folds[i]
        train_ids = [p for j, fold in enumerate(folds) if j != i for p in fold]
        model = train_on_table(
            table.for_patients(train_ids), spec, schema=cohort.schema, seed=cascade_fold_seed(spec.seed, i), cache=cache
        )
        held_out = table.for_patients(test_ids)
        probs = predict_on_table(model, held_out)
        y = held_out.targets(h)
        rows = y != -1
        logger.info("fold %d: %d train / %d test patients", i, len(train_ids), len(test_ids))
        return evaluate_fold(i, probs[rows], y[rows], threshold, len(test_ids))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, range(k)))
    else:
        results = [run_fold(i) for i in range(k)]
    return EvalReport(per_fold=results, config={}, seed=int(spec.seed))

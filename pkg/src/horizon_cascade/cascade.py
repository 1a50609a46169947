"""Cascaded horizon models.

Intermediate models predict onset ``h < target_horizon`` hours ahead from the
engineered features; their probabilities become extra ``subset_prob_<h>hr``
columns for the target-horizon model. Training-time probabilities are
out-of-fold by default so the target model never sees an intermediate's
in-sample fit.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import gbdt
from .cohort import Cohort, FeatureSchema
from .errors import ConfigError, DataError, DegenerateClassError
from .evaluation import stratified_patient_folds
from .features import FeatureFrame, HourlyTable, WindowSpec, build_hourly_table, subset_prob_name
from .gbdt import GbdtModel, TrainParams
from .labeling import UNKNOWN
from .sampling import SamplerConfig, resample_weights

logger = logging.getLogger(__name__)

MODES = {
    "one_subset": 1,
    "two_subsets": 2,
    "six_subsets": 6,
}
LEAKAGE_CONTROLS = ("oof", "insample")
MANIFEST_FORMAT = "horizon-cascade/cascade"
MANIFEST_VERSION = 1


def mode_for_subsets(n: int) -> str:
    for mode, k in MODES.items():
        if k == n:
            return mode
    raise ConfigError(f"subsets must be one of {sorted(MODES.values())}, got {n}")


@dataclass(frozen=True)
class CascadeSpec:
    target_horizon: int = 6
    mode: str = "six_subsets"
    window: WindowSpec = field(default_factory=WindowSpec)
    params: TrainParams = field(default_factory=TrainParams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    leakage_control: str = "oof"
    oof_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {sorted(MODES)}, got {self.mode!r}")
        if self.target_horizon < 2:
            raise ConfigError("target_horizon must be >= 2 for a cascade")
        if self.leakage_control not in LEAKAGE_CONTROLS:
            raise ConfigError(f"leakage_control must be one of {LEAKAGE_CONTROLS}")
        if self.oof_folds < 2:
            raise ConfigError("oof_folds must be >= 2")

    @property
    def intermediate_horizons(self) -> list[int]:
        if self.mode == "one_subset":
            return []
        if self.mode == "two_subsets":
            return [self.target_horizon // 2]
        return list(range(1, self.target_horizon))

    def to_json(self) -> dict:
        return {
            "target_horizon": self.target_horizon,
            "mode": self.mode,
            "intermediate_horizons": self.intermediate_horizons,
            "window": asdict(self.window),
            "params": asdict(self.params),
            "sampler": asdict(self.sampler),
            "leakage_control": self.leakage_control,
            "oof_folds": self.oof_folds,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CascadeSpec":
        return cls(
            target_horizon=doc["target_horizon"],
            mode=doc["mode"],
            window=WindowSpec(**doc["window"]),
            params=TrainParams(**doc["params"]),
            sampler=SamplerConfig(**doc["sampler"]),
            leakage_control=doc["leakage_control"],
            oof_folds=doc["oof_folds"],
            seed=doc["seed"],
        )


def model_seed(seed, horizon: int, inner_fold: int = -1) -> int:
    """Seed for one fitted model, independent of the order models are trained in."""
    entropy = [int(s) for s in np.atleast_1d(seed)]
    return int(np.random.SeedSequence([*entropy, horizon, inner_fold + 1]).generate_state(1)[0])


def cascade_fold_seed(seed, fold: int) -> int:
    return int(np.random.SeedSequence([int(seed), 0xCF, fold]).generate_state(1)[0])


@dataclass
class OofResult:
    """Out-of-fold probabilities at a set of rows, with provenance.

    ``model_of_row[i]`` names the inner model that scored row ``i`` and
    ``train_patients[m]`` the patients model ``m`` was fitted on.
    """

    horizon: int
    patient_ids: np.ndarray
    hours: np.ndarray
    probs: np.ndarray
    model_of_row: np.ndarray
    train_patients: list[frozenset[str]]

    def leakage_violations(self) -> int:
        return int(
            sum(pid in self.train_patients[m] for pid, m in zip(self.patient_ids.tolist(), self.model_of_row.tolist()))
        )


@dataclass(eq=False)
class CascadeModel:
    intermediates: dict[int, GbdtModel]
    target: GbdtModel
    spec: CascadeSpec
    schema: FeatureSchema
    base_columns: tuple[str, ...]
    feature_scale: dict[str, float] = field(default_factory=dict)
    feature_quantiles: dict[str, list[float]] = field(default_factory=dict)
    provenance: dict[int, OofResult] = field(default_factory=dict, repr=False)

    @property
    def target_features(self) -> tuple[str, ...]:
        return self.target.feature_names


def _require_both_classes(y: np.ndarray, horizon: int, where: str) -> None:
    if not (y == 1).any() or not (y == 0).any():
        raise DegenerateClassError(f"horizon {horizon}h: {where} contains a single class")


def fit_resampled(frame: FeatureFrame, params: TrainParams, sampler: SamplerConfig) -> GbdtModel:
    """Resample the training rows (as multiplicity weights) and fit one model."""
    return gbdt.fit(frame, params, sample_weight=resample_weights(frame.target, sampler))


class FitCache:
    """Fitted models keyed by everything a fit depends on.

    Sharing one cache across runs on the same cohort (for example the three
    cascade modes) reuses intermediates that would be refitted identically.
    """

    def __init__(self):
        self._models: dict[tuple, GbdtModel] = {}
        self.hits = 0

    @staticmethod
    def key(frame: FeatureFrame, params: TrainParams, sampler: SamplerConfig) -> tuple:
        digest = hashlib.blake2b(digest_size=16)
        digest.update(np.ascontiguousarray(frame.X).tobytes())
        digest.update(np.ascontiguousarray(frame.target).tobytes())
        digest.update("\x1f".join(frame.columns).encode())
        return (digest.hexdigest(), frame.X.shape, params, sampler)

    def get_or_fit(self, frame: FeatureFrame, params: TrainParams, sampler: SamplerConfig) -> GbdtModel:
        key = self.key(frame, params, sampler)
        model = self._models.get(key)
        if model is None:
            model = self._models[key] = fit_resampled(frame, params, sampler)
        else:
            self.hits += 1
        return model

    def __len__(self) -> int:
        return len(self._models)


def _fit_for(frame: FeatureFrame, spec: CascadeSpec, seed: int, cache: FitCache | None = None) -> GbdtModel:
    params, sampler = replace(spec.params, seed=seed), replace(spec.sampler, seed=seed)
    if cache is None:
        return fit_resampled(frame, params, sampler)
    return cache.get_or_fit(frame, params, sampler)


def _patient_codes(table: HourlyTable) -> tuple[np.ndarray, np.ndarray]:
    uniq, codes = np.unique(table.frame.patient_ids.astype(str), return_inverse=True)
    return uniq, codes


def oof_on_table(
    table: HourlyTable, horizon: int, spec: CascadeSpec, rows: np.ndarray, seed=None, k=None, cache: FitCache | None = None
) -> OofResult:
    """Score ``rows`` of ``table`` with horizon-``horizon`` models that never saw the row's patient."""
    seed = spec.seed if seed is None else seed
    k = spec.oof_folds if k is None else k
    if k < 2:
        raise ConfigError("out-of-fold scoring needs k >= 2")
    y_h = table.targets(horizon)
    uniq, codes = _patient_codes(table)
    positive = np.zeros(len(uniq), dtype=bool)
    positive[codes[y_h == 1]] = True
    folds = stratified_patient_folds(uniq, positive, k, seed=[model_seed(seed, horizon), 0x00F])
    fold_of_patient = np.empty(len(uniq), dtype=np.int64)
    index_of = {pid: i for i, pid in enumerate(uniq.tolist())}
    for j, members in enumerate(folds):
        fold_of_patient[[index_of[p] for p in members]] = j
    fold_of_row = fold_of_patient[codes]

    probs = np.empty(len(rows))
    model_of_row = fold_of_row[rows]
    train_sets = []
    X = table.frame.X
    for j in range(k):
        train_rows = np.flatnonzero((fold_of_row != j) & (y_h != UNKNOWN))
        _require_both_classes(y_h[train_rows], horizon, f"out-of-fold training split {j}")
        f = table.frame
        frame = FeatureFrame(f.patient_ids[train_rows], f.hours[train_rows], X[train_rows], f.columns, y_h[train_rows])
        model = _fit_for(frame, spec, model_seed(seed, horizon, j), cache)
        mine = model_of_row == j
        if mine.any():
            probs[mine] = gbdt.predict_matrix(model, X[rows[mine]])
        train_sets.append(frozenset(uniq[fold_of_patient != j].tolist()))
    f = table.frame
    return OofResult(horizon, f.patient_ids[rows], f.hours[rows], probs, model_of_row, train_sets)


def _insample_result(table: HourlyTable, horizon: int, model: GbdtModel, rows: np.ndarray) -> OofResult:
    f = table.frame
    probs = gbdt.predict_matrix(model, f.X[rows])
    everyone = frozenset(f.patient_ids.astype(str).tolist())
    return OofResult(horizon, f.patient_ids[rows], f.hours[rows], probs, np.zeros(len(rows), dtype=np.int64), [everyone])


def _reference_stats(frame: FeatureFrame, schema: FeatureSchema) -> tuple[dict, dict]:
    scale = {c: float(np.std(frame.column(c))) for c in frame.columns}
    static = [c.name for c in schema.columns if not c.trendable]
    quantiles = {c: np.quantile(frame.column(c), np.linspace(0, 1, 101)).tolist() for c in static}
    return scale, quantiles


def train_on_table(
    table: HourlyTable, spec: CascadeSpec, schema: FeatureSchema | None = None, seed=None, cache: FitCache | None = None
) -> CascadeModel:
    seed = spec.seed if seed is None else seed
    h_target = spec.target_horizon
    y_target = table.targets(h_target)
    rows = np.flatnonzero(y_target != UNKNOWN)
    _require_both_classes(y_target[rows], h_target, "target training rows")
    f = table.frame

    intermediates: dict[int, GbdtModel] = {}
    provenance: dict[int, OofResult] = {}
    extra_names, extra_cols = [], []
    for h in spec.intermediate_horizons:
        frame_h = table.horizon_frame(h)
        _require_both_classes(frame_h.target, h, "training rows")
        intermediates[h] = _fit_for(frame_h, spec, model_seed(seed, h), cache)
        if spec.leakage_control == "oof":
            result = oof_on_table(table, h, spec, rows, seed=seed, cache=cache)
        else:
            result = _insample_result(table, h, intermediates[h], rows)
        provenance[h] = result
        extra_names.append(subset_prob_name(h))
        extra_cols.append(result.probs)
        logger.debug("horizon %dh intermediate trained on %d rows", h, len(frame_h))

    X = f.X[rows]
    if extra_cols:
        X = np.hstack([X, np.column_stack(extra_cols)])
    target_frame = FeatureFrame(f.patient_ids[rows], f.hours[rows], X, (*f.columns, *extra_names), y_target[rows])
    target = _fit_for(target_frame, spec, model_seed(seed, h_target), cache)
    if schema is None:
        schema = FeatureSchema(())
    scale, quantiles = _reference_stats(target_frame, schema)
    return CascadeModel(intermediates, target, spec, schema, tuple(f.columns), scale, quantiles, provenance)


def train_cascade(cohort: Cohort, spec: CascadeSpec) -> CascadeModel:
    """Train intermediates and the target model on a filtered, imputed cohort."""
    return train_on_table(build_hourly_table(cohort, spec.window), spec, schema=cohort.schema)


def out_of_fold_probs(cohort: Cohort, horizon: int, spec: CascadeSpec, k: int = 5) -> OofResult:
    """Horizon-``horizon`` probabilities at the target-horizon rows, each from a model blind to that patient."""
    table = build_hourly_table(cohort, spec.window)
    rows = table.horizon_index(spec.target_horizon)
    return oof_on_table(table, horizon, spec, rows, k=k)


def target_matrix(model: CascadeModel, X_base: np.ndarray) -> np.ndarray:
    """Append intermediate probabilities (from the full intermediate models) to base features."""
    cols = [gbdt.predict_matrix(model.intermediates[h], X_base) for h in sorted(model.intermediates)]
    return np.hstack([X_base, np.column_stack(cols)]) if cols else X_base


def predict_on_table(model: CascadeModel, table: HourlyTable) -> np.ndarray:
    if tuple(table.frame.columns) != model.base_columns:
        raise DataError("feature columns differ from the ones the cascade was trained on")
    return gbdt.predict_matrix(model.target, target_matrix(model, table.frame.X))


def _check_schema(model: CascadeModel, cohort: Cohort) -> None:
    if model.schema.columns and cohort.schema.names != model.schema.names:
        raise DataError(
            f"cohort schema {cohort.schema.names} does not match the model's {model.schema.names}"
        )


@dataclass
class ScoredRows:
    patient_ids: np.ndarray
    hours: np.ndarray
    probs: np.ndarray
    target: np.ndarray


def predict_cascade(model: CascadeModel, cohort: Cohort) -> ScoredRows:
    """Target-horizon probability for every (patient, hour) of an imputed cohort.

    ``target`` carries the label ``target_horizon`` hours ahead, or -1 where
    the series ends too soon.
    """
    _check_schema(model, cohort)
    table = build_hourly_table(cohort, model.spec.window)
    probs = predict_on_table(model, table)
    return ScoredRows(table.frame.patient_ids, table.frame.hours, probs, table.targets(model.spec.target_horizon))


def cascade_feature_frame(model: CascadeModel, cohort: Cohort) -> FeatureFrame:
    """The target model's inputs at the target-horizon rows of ``cohort``."""
    _check_schema(model, cohort)
    table = build_hourly_table(cohort, model.spec.window)
    frame = table.horizon_frame(model.spec.target_horizon)
    return FeatureFrame(frame.patient_ids, frame.hours, target_matrix(model, frame.X), model.target_features, frame.target)


def save_cascade(model: CascadeModel, directory: str | Path) -> Path:
    """Write ``manifest.json`` plus one model file per horizon."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for h, m in sorted(model.intermediates.items()):
        name = f"horizon_{h}h.json"
        m.save(directory / name)
        files[str(h)] = name
    target_name = f"horizon_{model.spec.target_horizon}h_target.json"
    model.target.save(directory / target_name)
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "spec": model.spec.to_json(),
        "schema": model.schema.to_json(),
        "base_columns": list(model.base_columns),
        "intermediates": files,
        "target": target_name,
        "feature_scale": model.feature_scale,
        "feature_quantiles": model.feature_quantiles,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_cascade(directory: str | Path) -> CascadeModel:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read cascade manifest in {directory}: {exc}") from exc
    if manifest.get("format") != MANIFEST_FORMAT or manifest.get("version") != MANIFEST_VERSION:
        raise DataError(f"{directory} is not a {MANIFEST_FORMAT} v{MANIFEST_VERSION} directory")
    intermediates = {int(h): GbdtModel.load(directory / name) for h, name in manifest["intermediates"].items()}
    return CascadeModel(
        intermediates,
        GbdtModel.load(directory / manifest["target"]),
        CascadeSpec.from_json(manifest["spec"]),
        FeatureSchema.from_json(manifest["schema"]),
        tuple(manifest["base_columns"]),
        manifest["feature_scale"],
        manifest["feature_quantiles"],
    )

"""Seeded synthetic ICU cohorts with a known pre-onset signal.

Vital signs wander around per-patient baselines (AR(1) noise), static
profile columns carry a mild case-mix shift for event patients, cumulative
counters grow hourly and labs are sparse. Event patients get either a linear
drift that builds over ``pre_onset_ramp_hours`` before onset (progressive)
or a step in the last two hours up to onset (sudden).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .cohort import Cohort, Column, FeatureSchema, PatientSeries
from .errors import ConfigError
from .features import FeatureFrame
from .labeling import LabelTrack

SIGNAL_MODES = ("progressive", "sudden")
SUDDEN_HOURS = 2


@dataclass(frozen=True)
class Vital:
    """An autocorrelated column: population mean, between- and within-patient sd."""

    name: str
    group: str
    mean: float
    between_sd: float
    within_sd: float
    direction: int  # sign of the pre-onset change; 0 = uninformative
    decimals: int
    lower: float = -np.inf


VITALS = (
    Vital("hr", "G1", 85.0, 10.0, 5.0, +1, 0, 20.0),
    Vital("dbp", "G1", 65.0, 8.0, 4.0, -1, 0, 10.0),
    Vital("map", "G1", 80.0, 8.0, 4.0, -1, 0, 20.0),
    Vital("rr", "G1", 18.0, 3.0, 2.0, +1, 0, 4.0),
    Vital("temp", "G1", 37.0, 0.4, 0.3, +1, 1, 30.0),
    Vital("fio2", "G1", 0.35, 0.08, 0.03, +1, 2, 0.21),
    Vital("bicarb", "G4", 24.0, 3.0, 1.5, -1, 0, 5.0),
    Vital("strong_ion", "G4", 40.0, 4.0, 2.0, -1, 0, 10.0),
    Vital("bun", "G4", 20.0, 8.0, 2.0, +1, 0, 1.0),
    Vital("creatinine", "G4", 1.0, 0.3, 0.1, +1, 2, 0.2),
    Vital("wbc", "G4", 9.0, 3.0, 1.5, 0, 1, 0.5),
    Vital("uop", "G4", 80.0, 25.0, 15.0, 0, 0, 0.0),
)
TRENDABLE_VITALS = frozenset({"hr", "dbp", "map", "rr", "temp", "fio2", "bicarb", "strong_ion", "bun", "creatinine"})
STATIC = ("age", "sex", "transfer", "head_injury", "apache", "lactate_cat")
COUNTERS = ("bolus_sum", "vent_day_sum", "surg_hours")
AR_COEF = 0.95


def default_schema() -> FeatureSchema:
    """G1 vitals, G2 static profile, G3 cumulative counters, G4 labs; ``*`` columns are trendable."""
    cols = [Column(v.name, "G1", v.name in TRENDABLE_VITALS) for v in VITALS if v.group == "G1"]
    cols += [Column(name, "G2") for name in STATIC]
    cols += [Column("bolus_sum", "G3", True), Column("vent_day_sum", "G3"), Column("surg_hours", "G3")]
    cols += [Column(v.name, "G4", v.name in TRENDABLE_VITALS) for v in VITALS if v.group == "G4"]
    return FeatureSchema(tuple(cols))


def _default_missingness() -> dict[str, float]:
    return {"G1": 0.05, "G2": 0.0, "G3": 0.0, "G4": 0.85}


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = 500
    event_rate: float = 0.17
    stay_hours: tuple[int, int] = (48, 168)
    onset_day_range: tuple[int, int] = (2, 5)
    signal_mode: str = "progressive"
    pre_onset_ramp_hours: int = 12
    missingness: dict[str, float] = field(default_factory=_default_missingness)
    drift_scale: float = 2.0  # progressive drift at onset, in within-patient sd
    step_scale: float = 3.0  # sudden step, in within-patient sd
    case_mix_shift: float = 0.25  # static-profile shift for event patients, in between-patient sd
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stay_hours", tuple(int(v) for v in self.stay_hours))
        object.__setattr__(self, "onset_day_range", tuple(int(v) for v in self.onset_day_range))
        object.__setattr__(self, "missingness", {**_default_missingness(), **dict(self.missingness)})
        if self.n_patients < 1:
            raise ConfigError("n_patients must be >= 1")
        if not 0.0 <= self.event_rate <= 1.0:
            raise ConfigError("event_rate must be in [0, 1]")
        lo, hi = self.stay_hours
        if not 1 <= lo <= hi:
            raise ConfigError(f"stay_hours must satisfy 1 <= lo <= hi, got {self.stay_hours}")
        d0, d1 = self.onset_day_range
        if not 2 <= d0 <= d1 <= 14:
            raise ConfigError(f"onset_day_range must lie within days 2-14, got {self.onset_day_range}")
        if self.signal_mode not in SIGNAL_MODES:
            raise ConfigError(f"signal_mode must be one of {SIGNAL_MODES}")
        if self.pre_onset_ramp_hours < 1:
            raise ConfigError("pre_onset_ramp_hours must be >= 1")
        for g, rate in self.missingness.items():
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"missingness for {g} must be in [0, 1), got {rate}")

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["stay_hours"] = list(self.stay_hours)
        doc["onset_day_range"] = list(self.onset_day_range)
        return doc


def _ar1(rng: np.random.Generator, t: int, sd: np.ndarray) -> np.ndarray:
    """Stationary AR(1) noise, one column per entry of ``sd``."""
    innov = rng.normal(size=(t, sd.size)) * sd * np.sqrt(1.0 - AR_COEF**2)
    out = np.empty((t, sd.size))
    out[0] = rng.normal(size=sd.size) * sd
    for i in range(1, t):
        out[i] = AR_COEF * out[i - 1] + innov[i]
    return out


def _signal(cfg: SynthConfig, t: int, onset: int) -> np.ndarray:
    """Per-hour multiplier in [0, 1] of the event effect."""
    hours = np.arange(t)
    if cfg.signal_mode == "progressive":
        ramp = cfg.pre_onset_ramp_hours
        return np.clip((hours - (onset - ramp)) / ramp, 0.0, 1.0)
    return (hours > onset - SUDDEN_HOURS).astype(np.float64)


def _static_profile(rng: np.random.Generator, event: bool, shift: float) -> list[float]:
    s = shift if event else 0.0
    age = float(np.clip(np.round(rng.normal(60.0 + 15.0 * s, 15.0)), 18, 95))
    sex = float(rng.random() < 0.5)
    transfer = float(rng.random() < 0.3 + 0.3 * s)
    head_injury = float(rng.random() < 0.15)
    apache = float(np.clip(np.round(rng.normal(55.0 + 18.0 * s, 18.0)), 0, 200))
    lactate_cat = float(min(3, rng.poisson(0.8 + 1.2 * s)))
    return [age, sex, transfer, head_injury, apache, lactate_cat]


def _patient(cfg: SynthConfig, rng: np.random.Generator, pid: str, schema: FeatureSchema) -> PatientSeries:
    event = bool(rng.random() < cfg.event_rate)
    lo, hi = cfg.stay_hours
    stay = int(rng.integers(lo, hi + 1))
    onset = -1
    if event:
        d0, d1 = cfg.onset_day_range
        onset = 24 * (int(rng.integers(d0, d1 + 1)) - 1) + int(rng.integers(0, 24))
        if stay <= onset:
            stay = onset + 1 + int(rng.integers(0, 12))
    t = stay

    means = np.array([v.mean for v in VITALS])
    between = np.array([v.between_sd for v in VITALS])
    within = np.array([v.within_sd for v in VITALS])
    direction = np.array([v.direction for v in VITALS], dtype=np.float64)
    baseline = means + rng.normal(size=len(VITALS)) * between
    if event:
        baseline += direction * cfg.case_mix_shift * between
    vitals = baseline + _ar1(rng, t, within)
    if event:
        scale = cfg.drift_scale if cfg.signal_mode == "progressive" else cfg.step_scale
        vitals += np.outer(_signal(cfg, t, onset), direction * scale * within)
    lower = np.array([v.lower for v in VITALS])
    vitals = np.maximum(vitals, lower)
    for j, v in enumerate(VITALS):
        vitals[:, j] = np.round(vitals[:, j], v.decimals)

    static = np.tile(_static_profile(rng, event, cfg.case_mix_shift), (t, 1))

    bolus_rate = np.full(t, 0.05)
    if event:
        bolus_rate += 0.25 * _signal(cfg, t, onset)
    bolus = np.cumsum(rng.poisson(bolus_rate)).astype(np.float64)
    ventilated = rng.random() < 0.4 + (0.2 if event else 0.0)
    vent_days = (np.arange(t) // 24 + 1).astype(np.float64) * ventilated
    surgery = np.cumsum(rng.random(t) < 0.02).astype(np.float64)
    counters = np.column_stack([bolus, vent_days, surgery])

    by_name = {v.name: vitals[:, j] for j, v in enumerate(VITALS)}
    by_name.update({name: static[:, j] for j, name in enumerate(STATIC)})
    by_name.update({name: counters[:, j] for j, name in enumerate(COUNTERS)})
    values = np.column_stack([by_name[c.name] for c in schema.columns])

    rates = np.array([cfg.missingness[c.group] for c in schema.columns])
    observed = rng.random(values.shape) >= rates
    static_cols = np.array([c.group == "G2" for c in schema.columns])
    observed[:, static_cols] = observed[0, static_cols]
    values = np.where(observed, values, np.nan)

    labels = np.zeros(t, dtype=np.int8)
    if event:
        labels[onset:] = 1
    return PatientSeries(pid, 0, values, observed, LabelTrack(labels))


def generate_cohort(cfg: SynthConfig) -> Cohort:
    """Draw ``cfg.n_patients`` patients from one seeded stream; same config, same cohort."""
    lo, hi = cfg.stay_hours
    earliest_onset = 24 * (cfg.onset_day_range[0] - 1)
    if cfg.event_rate > 0 and hi <= earliest_onset:
        raise ConfigError(
            f"stays of at most {hi} hours cannot contain an onset on day {cfg.onset_day_range[0]} or later"
        )
    schema = default_schema()
    rng = np.random.default_rng(cfg.seed)
    width = len(str(cfg.n_patients - 1))
    patients = tuple(_patient(cfg, rng, f"p{i:0{width}d}", schema) for i in range(cfg.n_patients))
    return Cohort(schema, patients)


def single_signal_frame(n: int = 400, n_features: int = 5, signal: int = 0, noise: float = 0.5, seed=0) -> FeatureFrame:
    """Rows where only column ``signal`` drives the label: ``y = [x_signal + noise * e > 0]``."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n_features))
    y = (X[:, signal] + noise * rng.normal(size=n) > 0).astype(np.int8)
    names = tuple(f"x{j}" for j in range(n_features))
    return FeatureFrame(np.array([f"r{i}" for i in range(n)]), np.zeros(n, dtype=np.int64), X, names, y)

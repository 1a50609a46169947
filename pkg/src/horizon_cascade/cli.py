"""Command-line entry point: ``horizon-cascade {synth,run,explain}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 single-class
data where two classes are needed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import MODES, CascadeSpec, cascade_feature_frame, load_cascade, mode_for_subsets, save_cascade, train_cascade
from .cohort import FeatureSchema, ingest_csv, parse_groups, write_csv
from .errors import ConfigError, DataError, HorizonCascadeError
from .evaluation import cross_validate
from .explain import local_surrogate, rank_features
from .features import FEATURE_FLAGS, WindowSpec, build_hourly_table
from .gbdt import TrainParams
from .pipeline import FIRST_DAY, LAST_DAY, prepare_cohort
from .sampling import SamplerConfig
from .synth import SIGNAL_MODES, SynthConfig, generate_cohort

logger = logging.getLogger("horizon_cascade")

SEED_ENV = "HORIZON_CASCADE_SEED"
INPUT_SCHEMA = "input_schema.json"
RUN_NOTES = (
    "folds split by patient and stratified by whether the patient has a positive target row",
    "oversampling to the minority ratio, then majority undersampled to parity, on training rows only",
    "evaluation rows are never resampled",
)


def config_hash(doc: dict) -> str:
    """SHA-256 of the canonical JSON form of ``doc``."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


@dataclass
class RunConfig:
    """Everything that determines a ``run`` report. Paths and thread count are excluded on purpose."""

    cohort_sha256: str
    schema: list[dict]
    groups: list[str]
    start_day: int
    end_day: int
    cascade: dict
    k: int
    threshold: float
    seed: int
    version: str = __version__
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        return config_hash(self.to_json())


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_synth(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    cfg = SynthConfig(
        n_patients=args.n_patients,
        event_rate=args.event_rate,
        stay_hours=tuple(args.stay_hours),
        onset_day_range=tuple(args.onset_days),
        signal_mode=args.signal_mode,
        pre_onset_ramp_hours=args.ramp_hours,
        drift_scale=args.drift_scale,
        step_scale=args.step_scale,
        seed=seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cohort = generate_cohort(cfg)
    write_csv(cohort, out / "cohort.csv")
    cohort.schema.save(out / "schema.json")
    doc = {"synth": cfg.to_json(), "seed": cfg.seed}
    doc["config_hash"] = config_hash(doc["synth"])
    doc["n_rows"] = cohort.n_rows
    doc["n_event_patients"] = int(sum((p.labels.onset == 1).any() for p in cohort.patients))
    _write_json(out / "synth.json", doc)
    print(f"wrote {cohort.n_rows} rows for {len(cohort)} patients to {out / 'cohort.csv'}")
    return 0


def _spec_from_args(args, seed: int) -> CascadeSpec:
    return CascadeSpec(
        target_horizon=6,
        mode=mode_for_subsets(args.subsets),
        window=WindowSpec.from_flag(args.features, args.window),
        params=TrainParams(
            n_rounds=args.n_rounds,
            max_depth=args.max_depth,
            learning_rate=args.learning_rate,
            reg_lambda=args.reg_lambda,
            gamma=args.gamma,
            min_child_weight=args.min_child_weight,
        ),
        sampler=SamplerConfig(oversample_ratio=args.oversample_ratio),
        leakage_control=args.leakage_control,
        oof_folds=args.oof_folds,
        seed=seed,
    )


def _load_schema(path) -> FeatureSchema:
    if path is None:
        raise ConfigError("--schema is required")
    return FeatureSchema.load(path)


def cmd_run(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    schema = _load_schema(args.schema)
    groups = sorted(parse_groups(args.groups))
    spec = _spec_from_args(args, seed)
    raw = ingest_csv(args.cohort, schema)
    prepared = prepare_cohort(raw, groups=groups, start_day=args.start_day, end_day=args.end_day)
    cohort = prepared.cohort

    config = RunConfig(
        cohort_sha256=file_digest(args.cohort),
        schema=schema.to_json(),
        groups=groups,
        start_day=args.start_day,
        end_day=args.end_day,
        cascade=spec.to_json(),
        k=args.k,
        threshold=args.threshold,
        seed=seed,
    )
    digest = config.hash
    logger.info("run %s: mode %s, features %s, groups %s", digest[:12], spec.mode, spec.window.flag, ",".join(groups))

    table = build_hourly_table(cohort, spec.window)
    report = cross_validate(cohort, spec, k=args.k, threshold=args.threshold, threads=args.threads, table=table)
    report.config = {**config.to_json(), "config_hash": digest, "feature_columns": list(table.frame.columns)}
    report.notes = [*prepared.notes, *RUN_NOTES]
    report.notes.append(f"intermediate probabilities for training the target come from {spec.leakage_control} models")
    report.notes.append(f"{len(prepared.excluded)} patients excluded, {len(cohort)} used")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.save(out / "report.json")
    report.write_roc_csv(out)
    if args.dump_features:
        table.horizon_frame(spec.target_horizon).to_csv(args.dump_features)
    if args.save_model:
        model = train_cascade(cohort, spec)
        path = save_cascade(model, args.save_model)
        schema.save(Path(args.save_model) / INPUT_SCHEMA)
        _write_json(Path(args.save_model) / "run.json", {"config_hash": digest, "seed": seed, "groups": groups})
        logger.info("model written to %s", path.parent)
    print(
        f"mean AUROC {report.mean_auroc:.4f}  sensitivity {report.mean_sensitivity:.4f}  "
        f"specificity {report.mean_specificity:.4f}  ({out / 'report.json'})"
    )
    return 0


def _pick_instance(frame, selector: str, seed: int) -> int:
    if selector == "random":
        return int(np.random.default_rng(seed).integers(len(frame)))
    pid, sep, hour = selector.rpartition(":")
    if not sep:
        raise ConfigError(f"--instance must be 'random' or PATIENT:HOUR, got {selector!r}")
    try:
        hour = int(hour)
    except ValueError:
        raise ConfigError(f"--instance hour must be an integer, got {hour!r}") from None
    hits = np.flatnonzero((frame.patient_ids == pid) & (frame.hours == hour))
    if hits.size == 0:
        raise DataError(f"no scored row for patient {pid!r} at hour {hour}")
    return int(hits[0])


def cmd_explain(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    model_dir = Path(args.model)
    if not (model_dir / "manifest.json").is_file():
        raise DataError(f"no saved model in {model_dir}")
    model = load_cascade(model_dir)
    groups = sorted({c.group for c in model.schema.columns})
    if args.schema:
        schema = FeatureSchema.load(args.schema)
    elif (model_dir / INPUT_SCHEMA).is_file():
        schema = FeatureSchema.load(model_dir / INPUT_SCHEMA)
    else:
        schema = model.schema
    raw = ingest_csv(args.cohort, schema)
    cohort = prepare_cohort(raw, groups=groups, start_day=args.start_day, end_day=args.end_day).cohort
    frame = cascade_feature_frame(model, cohort)
    if len(frame) == 0:
        raise DataError("cohort has no rows at the target horizon")
    row = _pick_instance(frame, args.instance, seed)
    instance_id = f"{frame.patient_ids[row]}:{int(frame.hours[row])}"
    expl = local_surrogate(model, frame.X[row], n=args.n, top_k=args.top_k, seed=seed, instance_id=instance_id)
    doc = expl.to_json()
    doc["gain_ranking"] = [[name, gain] for name, gain in rank_features(model, args.top_k)]
    settings = {"model_manifest_sha256": file_digest(model_dir / "manifest.json"), "cohort_sha256": file_digest(args.cohort),
                "instance": args.instance, "n": args.n, "top_k": args.top_k, "seed": seed, "version": __version__}
    doc["config_hash"] = config_hash(settings)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(expl.table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="horizon-cascade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic cohort CSV and schema JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-patients", type=int, default=500)
    p.add_argument("--event-rate", type=float, default=0.17)
    p.add_argument("--stay-hours", type=int, nargs=2, default=SynthConfig.stay_hours, metavar=("LO", "HI"))
    p.add_argument("--onset-days", type=int, nargs=2, default=SynthConfig.onset_day_range, metavar=("FIRST", "LAST"))
    p.add_argument("--signal-mode", choices=SIGNAL_MODES, default="progressive")
    p.add_argument("--ramp-hours", type=int, default=SynthConfig.pre_onset_ramp_hours)
    p.add_argument("--drift-scale", type=float, default=SynthConfig.drift_scale)
    p.add_argument("--step-scale", type=float, default=SynthConfig.step_scale)
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="cross-validate a cascade on a cohort")
    p.add_argument("--cohort", required=True, help="cohort CSV")
    p.add_argument("--schema", help="schema JSON")
    p.add_argument("--out", required=True, help="output directory for report.json and ROC CSVs")
    p.add_argument("--subsets", type=int, choices=sorted(MODES.values()), default=6)
    p.add_argument("--features", choices=FEATURE_FLAGS, default="delta+stats")
    p.add_argument("--groups", default="g1,g2,g3,g4", help="comma-separated feature groups")
    p.add_argument("--window", type=int, default=6, help="observation window w in hours")
    p.add_argument("--k", type=int, default=5, help="cross-validation folds")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=1, help="parallel fold workers (results do not depend on it)")
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--start-day", type=int, default=FIRST_DAY)
    p.add_argument("--end-day", type=int, default=LAST_DAY)
    defaults = TrainParams()
    p.add_argument("--n-rounds", type=int, default=defaults.n_rounds)
    p.add_argument("--max-depth", type=int, default=defaults.max_depth)
    p.add_argument("--learning-rate", type=float, default=defaults.learning_rate)
    p.add_argument("--reg-lambda", type=float, default=defaults.reg_lambda)
    p.add_argument("--gamma", type=float, default=defaults.gamma)
    p.add_argument("--min-child-weight", type=float, default=defaults.min_child_weight)
    p.add_argument("--oversample-ratio", type=float, default=SamplerConfig().oversample_ratio)
    p.add_argument("--leakage-control", choices=("oof", "insample"), default="oof")
    p.add_argument("--oof-folds", type=int, default=5)
    p.add_argument("--save-model", help="also fit on the whole cohort and save the cascade here")
    p.add_argument("--dump-features", help="write the target-horizon feature rows to this CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explain", help="explain one prediction of a saved cascade")
    p.add_argument("--model", required=True, help="directory written by run --save-model")
    p.add_argument("--cohort", required=True, help="cohort CSV to draw the instance from")
    p.add_argument("--schema", help="schema JSON of the cohort file (default: the one saved with the model)")
    p.add_argument("--instance", default="random", help="'random' or PATIENT:HOUR")
    p.add_argument("--n", type=int, default=1000, help="perturbations")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--start-day", type=int, default=FIRST_DAY)
    p.add_argument("--end-day", type=int, default=LAST_DAY)
    p.add_argument("--out", help="write the explanation JSON here")
    p.set_defaults(func=cmd_explain)
    return parser


def _origin(exc: BaseException) -> str:
    """Short name of the package module that raised ``exc``."""
    name = "horizon_cascade"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("horizon_cascade."):
            name = mod
    return name.rsplit(".", 1)[-1]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HorizonCascadeError as exc:
        print(f"horizon-cascade: {_origin(exc)} error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"horizon-cascade: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Local surrogate explanations and global gain ranking for fitted models.

``local_surrogate`` perturbs one input row, scores the perturbations with the
model and fits a proximity-weighted linear model in standardized units; its
coefficients say how the prediction moves near that row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import gbdt
from .cascade import CascadeModel
from .errors import ConfigError, DataError
from .gbdt import GbdtModel

MIN_PERTURBATIONS = 50
RIDGE = 1e-6


@dataclass
class Explanation:
    instance_id: str
    weights: list[tuple[str, float]]
    kernel_width: float
    n_perturbations: int
    seed: int
    intercept: float = 0.0
    prediction: float = 0.0
    ridge_fallback: bool = False
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "weights": [[name, w] for name, w in self.weights],
            "kernel_width": self.kernel_width,
            "n_perturbations": self.n_perturbations,
            "seed": self.seed,
            "intercept": self.intercept,
            "prediction": self.prediction,
            "ridge_fallback": self.ridge_fallback,
            "notes": list(self.notes),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        """Two columns, ``Feature`` and ``Value``, one row per retained feature."""
        width = max([len("Feature"), *(len(name) for name, _ in self.weights)])
        lines = [f"{'Feature':<{width}}  {'Value':>8}"]
        lines += [f"{name:<{width}}  {w:>8.3f}" for name, w in self.weights]
        return "\n".join(lines) + "\n"


def kernel_width(n_features: int) -> float:
    return 0.75 * float(np.sqrt(n_features))


def _reference(model, scale):
    """Per-feature perturbation scale and resampling pools for static columns."""
    if isinstance(model, CascadeModel):
        names = model.target_features
        sigma = np.array([model.feature_scale.get(n, 0.0) for n in names]) if scale is None else np.asarray(scale)
        pools = {names.index(c): np.asarray(q) for c, q in model.feature_quantiles.items() if c in names}
        return model.target, names, sigma, pools
    if isinstance(model, GbdtModel):
        if scale is None:
            raise ConfigError("a bare GbdtModel needs per-feature scale for perturbation")
        return model, model.feature_names, np.asarray(scale, dtype=np.float64), {}
    raise ConfigError(f"cannot explain a {type(model).__name__}")


def local_surrogate(
    model,
    instance,
    n: int = 500,
    top_k: int = 5,
    seed: int = 0,
    scale=None,
    instance_id: str = "",
    width: float | None = None,
) -> Explanation:
    """Explain one row of the (target) model's inputs.

    Each perturbation adds Gaussian noise with the feature's training standard
    deviation; static columns are instead redrawn from their training
    quantiles. Rows are weighted by ``exp(-d^2 / width^2)`` where ``d`` is the
    distance to the instance in standardized units. Perturbations for ``n``
    are a prefix of those for any larger ``n`` with the same seed.
    """
    if n < MIN_PERTURBATIONS:
        raise ConfigError(f"need at least {MIN_PERTURBATIONS} perturbations, got {n}")
    if top_k < 1:
        raise ConfigError("top_k must be >= 1")
    learner, names, sigma, pools = _reference(model, scale)
    x0 = np.asarray(instance, dtype=np.float64)
    f = len(names)
    if x0.shape != (f,) or sigma.shape != (f,):
        raise DataError(f"instance and scale must have {f} entries")
    if not np.isfinite(x0).all():
        raise DataError("instance contains non-finite values")

    noise_seq, pool_seq = np.random.SeedSequence(seed).spawn(2)
    Z = np.random.default_rng(noise_seq).normal(size=(n, f))
    X = x0 + Z * sigma
    if pools:
        picks = np.random.default_rng(pool_seq).random(size=(n, len(pools)))
        for k, (j, q) in enumerate(sorted(pools.items())):
            X[:, j] = q[np.minimum((picks[:, k] * len(q)).astype(np.int64), len(q) - 1)]
    X[0] = x0

    unit = np.where(sigma > 0, sigma, 1.0)
    D = (X - x0) / unit
    kw = kernel_width(f) if width is None else float(width)
    prox = np.exp(-np.sum(D * D, axis=1) / kw**2)
    y = gbdt.predict_matrix(learner, X)

    design = np.hstack([np.ones((n, 1)), D])
    root = np.sqrt(prox)[:, None]
    A = design * root
    b = y * root[:, 0]
    coef, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    fallback = rank < design.shape[1]
    notes = []
    if fallback:
        # some directions carry no variation (e.g. zero-scale columns): ridge keeps them at 0
        penalty = RIDGE * np.eye(design.shape[1])
        penalty[0, 0] = 0.0
        coef = np.linalg.solve(A.T @ A + penalty, A.T @ b)
        notes.append(f"weighted design has rank {rank} < {design.shape[1]}; ridge {RIDGE} applied")
    weights = coef[1:]
    order = sorted(range(f), key=lambda j: (-abs(weights[j]), j))[: min(top_k, f)]
    return Explanation(
        instance_id=str(instance_id),
        weights=[(names[j], float(weights[j])) for j in order],
        kernel_width=kw,
        n_perturbations=n,
        seed=int(seed),
        intercept=float(coef[0]),
        prediction=float(y[0]),
        ridge_fallback=bool(fallback),
        notes=notes,
    )


def rank_features(model, top_k: int | None = None) -> list[tuple[str, float]]:
    """Target-model features by total split gain, largest first (cascade columns included)."""
    learner = model.target if isinstance(model, CascadeModel) else model
    gains = gbdt.gain_importance(learner)
    ranked = sorted(gains.items(), key=lambda kv: -kv[1])
    return ranked if top_k is None else ranked[: max(top_k, 0)]

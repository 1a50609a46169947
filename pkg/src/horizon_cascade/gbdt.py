"""Second-order gradient-boosted trees for binary classification (logistic loss).

Each round fits one tree to the gradients ``p - y`` and hessians ``p (1 - p)``
with exact greedy splits; leaves store ``-G / (H + lambda)`` in log-odds and
the ensemble predicts ``sigmoid(logit(base_score) + eta * sum(leaves))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, DegenerateClassError
from .features import FeatureFrame

MODEL_FORMAT = "horizon-cascade/gbdt"
MODEL_VERSION = 1
MARGIN_CLIP = 35.0


@dataclass(frozen=True)
class TrainParams:
    n_rounds: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    base_score: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ConfigError("n_rounds must be >= 0")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ConfigError("reg_lambda, gamma and min_child_weight must be >= 0")
        if not 0.0 < self.base_score < 1.0:
            raise ConfigError("base_score must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf whose output is ``value``.

    ``default_left`` is carried in the format for missing values, which never
    reach the learner.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    default_left: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
            "default_left": self.default_left.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Tree":
        return cls(
            np.asarray(doc["feature"], dtype=np.int64),
            np.asarray(doc["threshold"], dtype=np.float64),
            np.asarray(doc["left"], dtype=np.int64),
            np.asarray(doc["right"], dtype=np.int64),
            np.asarray(doc["value"], dtype=np.float64),
            np.asarray(doc["gain"], dtype=np.float64),
            np.asarray(doc["default_left"], dtype=bool),
        )


@dataclass(eq=False)
class GbdtModel:
    trees: list[Tree]
    params: TrainParams
    feature_names: tuple[str, ...]
    train_loss: list[float] = field(default_factory=list)
    _packed: tuple | None = field(default=None, init=False, repr=False)

    def _pack(self):
        if self._packed is None:
            if self.trees:
                offsets = np.cumsum([0] + [t.n_nodes for t in self.trees]).astype(np.int64)
                cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])  # noqa: E731
                self._packed = (
                    cat("feature"), cat("threshold"), cat("left"), cat("right"), cat("value"), offsets
                )
            else:
                self._packed = ()
        return self._packed

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": asdict(self.params),
            "feature_names": list(self.feature_names),
            "train_loss": list(self.train_loss),
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GbdtModel":
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise DataError(f"not a {MODEL_FORMAT} v{MODEL_VERSION} document")
        return cls(
            [Tree.from_json(t) for t in doc["trees"]],
            TrainParams(**doc["params"]),
            tuple(doc["feature_names"]),
            list(doc.get("train_loss", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "GbdtModel":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read model {path}: {exc}") from exc
        return cls.from_json(doc)


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _sigmoid(margin: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(margin, -MARGIN_CLIP, MARGIN_CLIP)))


def log_loss_from_margin(y: np.ndarray, margin: np.ndarray, weight: np.ndarray) -> float:
    # log(1 + e^m) - y m, computed stably
    per_row = np.logaddexp(0.0, margin) - y * margin
    return float(np.sum(weight * per_row) / np.sum(weight))


def _check_matrix(X: np.ndarray) -> None:
    if not np.isfinite(X).all():
        bad = np.argwhere(~np.isfinite(X))[0]
        raise DataError(f"non-finite feature value at row {bad[0]}, column {bad[1]}")


def fit(frame: FeatureFrame, params: TrainParams = TrainParams(), sample_weight: np.ndarray | None = None) -> GbdtModel:
    """Boost ``params.n_rounds`` trees on ``frame``.

    ``sample_weight`` scales each row's gradient and hessian; integer weights
    are equivalent to duplicating rows.
    """
    X = frame.X
    y = frame.target.astype(np.float64)
    if len(frame) == 0:
        raise DataError("cannot fit on an empty frame")
    if not np.isin(frame.target, (0, 1)).all():
        raise DataError("training targets must be 0 or 1")
    w = np.ones(len(frame)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    if w.shape != y.shape or (w < 0).any():
        raise DataError("sample_weight must be non-negative with one entry per row")
    active = w > 0
    if not (y[active] == 1).any() or not (y[active] == 0).any():
        raise DegenerateClassError("training rows contain a single class")
    _check_matrix(X)
    if not active.all():
        X, y, w = X[active], y[active], w[active]

    margin = np.full(len(y), _logit(params.base_score))
    losses = [log_loss_from_margin(y, margin, w)]
    trees = []
    if params.n_rounds:
        order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int32))
        sorted_x = np.ascontiguousarray(np.take_along_axis(X.T, order, axis=1))
        scratch_order = np.empty((2, *order.shape), dtype=np.int32)
        scratch_x = np.empty((2, *order.shape))
    for _ in range(params.n_rounds):
        p = _sigmoid(margin)
        grad = (p - y) * w
        hess = p * (1.0 - p) * w
        feature, threshold, left, right, value, gain, leaf_of_row = kernels.grow_tree(
            X, order, sorted_x, grad, hess,
            params.max_depth, params.reg_lambda, params.gamma, params.min_child_weight,
            scratch_order, scratch_x,
        )
        trees.append(Tree(feature, threshold, left, right, value, gain, np.ones(len(feature), dtype=bool)))
        margin = margin + params.learning_rate * value[leaf_of_row]
        losses.append(log_loss_from_margin(y, margin, w))
    return GbdtModel(trees, params, tuple(frame.columns), losses)


def _matrix_for(model: GbdtModel, frame: FeatureFrame) -> np.ndarray:
    if tuple(frame.columns) != model.feature_names:
        missing = [c for c in model.feature_names if c not in frame.columns]
        raise DataError(f"frame columns do not match the model's features (missing {missing[:5]})")
    return frame.X


def decision_margin(model: GbdtModel, X: np.ndarray) -> np.ndarray:
    base = _logit(model.params.base_score)
    packed = model._pack()
    if not packed:
        return np.full(X.shape[0], base)
    return base + model.params.learning_rate * kernels.ensemble_sum(np.ascontiguousarray(X), *packed)


def predict_proba(model: GbdtModel, frame: FeatureFrame) -> np.ndarray:
    """Probability of the positive class per row, strictly inside (0, 1)."""
    X = _matrix_for(model, frame)
    _check_matrix(X)
    return _sigmoid(decision_margin(model, X))


def predict_matrix(model: GbdtModel, X: np.ndarray) -> np.ndarray:
    """``predict_proba`` for a bare matrix laid out as ``model.feature_names``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise DataError(f"expected {len(model.feature_names)} columns, got shape {X.shape}")
    return _sigmoid(decision_margin(model, X))


def gain_importance(model: GbdtModel) -> dict[str, float]:
    """Total split gain per feature; features never used score 0."""
    totals = np.zeros(len(model.feature_names))
    for tree in model.trees:
        split = tree.feature >= 0
        np.add.at(totals, tree.feature[split], tree.gain[split])
    return {name: float(v) for name, v in zip(model.feature_names, totals)}

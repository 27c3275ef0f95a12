"""Reference and contrastive losses, their gradients, and training-target assignment."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .geometry import Aabb, box_arrays
from .kernels import pairwise_iou
from .matching import build_cost_matrix, hungarian

DEFAULT_TEMPERATURE = 0.07
DEFAULT_TAU_TRAIN = 0.5


class LossError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FeatureBatch:
    """Sentence features ``S`` and mean target-object features ``O``, row-paired."""

    sentence_features: np.ndarray
    object_features: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.sentence_features, dtype=np.float64))
        o = np.atleast_2d(np.asarray(self.object_features, dtype=np.float64))
        if s.shape != o.shape or s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise LossError(f"feature shapes must match and be (n, d), got {s.shape} and {o.shape}")
        if not self.temperature > 0:
            raise LossError(f"temperature must be positive, got {self.temperature}")
        for name, x in (("sentence", s), ("object", o)):
            if np.any(np.linalg.norm(x, axis=1) == 0.0):
                raise LossError(f"zero-norm {name} feature row")
        object.__setattr__(self, "sentence_features", s)
        object.__setattr__(self, "object_features", o)
        object.__setattr__(self, "temperature", float(self.temperature))

    @property
    def n(self) -> int:
        return self.sentence_features.shape[0]

    @property
    def d(self) -> int:
        return self.sentence_features.shape[1]


def _logsumexp(z: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(z, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(z - m), axis=axis, keepdims=True))).squeeze(axis)


def _softmax(z: np.ndarray, axis: int) -> np.ndarray:
    e = np.exp(z - np.max(z, axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _normalized(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / norms, norms


def _logits(batch: FeatureBatch):
    o_hat, o_norm = _normalized(batch.object_features)
    s_hat, s_norm = _normalized(batch.sentence_features)
    # logits[i, j] = cos(O_i, S_j) / tau
    return (o_hat @ s_hat.T) / batch.temperature, o_hat, o_norm, s_hat, s_norm


def contrastive_loss(batch: FeatureBatch) -> tuple[float, dict[str, float]]:
    """Symmetric InfoNCE over cosine similarities.

    Returns ``(total, {"o2s": ..., "s2o": ...})``; each direction is the batch
    mean of ``-log softmax`` at the matching index, the total is their mean.
    """
    z, *_ = _logits(batch)
    diag = np.diag(z)
    o2s = float(np.mean(_logsumexp(z, axis=1) - diag))
    s2o = float(np.mean(_logsumexp(z, axis=0) - diag))
    return 0.5 * (o2s + s2o), {"o2s": o2s, "s2o": s2o}


def contrastive_grad(batch: FeatureBatch) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the total contrastive loss w.r.t. ``(S, O)``."""
    z, o_hat, o_norm, s_hat, s_norm = _logits(batch)
    n = batch.n
    eye = np.eye(n)
    g_z = 0.5 * ((_softmax(z, axis=1) - eye) + (_softmax(z, axis=0) - eye)) / n
    g_cos = g_z / batch.temperature
    g_o_hat = g_cos @ s_hat
    g_s_hat = g_cos.T @ o_hat

    def through_norm(g, unit, norm):
        return (g - unit * np.sum(unit * g, axis=1, keepdims=True)) / norm

    return through_norm(g_s_hat, s_hat, s_norm), through_norm(g_o_hat, o_hat, o_norm)


def finite_difference_grad(batch: FeatureBatch, h: float = 1e-5) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of the total loss, one coordinate at a time."""
    grads = []
    for which in ("sentence_features", "object_features"):
        base = getattr(batch, which)
        g = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[idx] += h
            minus[idx] -= h
            other = {k: getattr(batch, k) for k in ("sentence_features", "object_features")}
            other[which] = plus
            lp = contrastive_loss(FeatureBatch(**other, temperature=batch.temperature))[0]
            other[which] = minus
            lm = contrastive_loss(FeatureBatch(**other, temperature=batch.temperature))[0]
            g[idx] = (lp - lm) / (2 * h)
        grads.append(g)
    return grads[0], grads[1]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max-abs error relative to the largest numeric component."""
    scale = max(float(np.max(np.abs(numeric), initial=0.0)), float(np.max(np.abs(analytic), initial=0.0)), floor)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def gradient_selftest(n_batches: int = 100, seed: int = 0, temperatures=(0.05, 0.5, 1.0),
                      max_n: int = 8, max_d: int = 16) -> list[dict]:
    rng = np.random.default_rng(seed)
    records = []
    for k in range(n_batches):
        n = int(rng.integers(1, max_n + 1))
        d = int(rng.integers(1, max_d + 1))
        tau = float(temperatures[k % len(temperatures)])
        batch = FeatureBatch(rng.normal(size=(n, d)), rng.normal(size=(n, d)), tau)
        gs, go = contrastive_grad(batch)
        fs, fo = finite_difference_grad(batch)
        err = relative_error(np.concatenate([gs.ravel(), go.ravel()]), np.concatenate([fs.ravel(), fo.ravel()]))
        records.append({"batch": k, "n": n, "d": d, "temperature": tau, "rel_error": err})
    return records


class Strategy(str, Enum):
    ALL = "all"
    HUNGARIAN = "hungarian"


@dataclass(frozen=True)
class TargetLabels:
    labels: tuple[bool, ...]
    strategy: Strategy
    tau_train: float

    def positives(self) -> set[int]:
        return {i for i, on in enumerate(self.labels) if on}


def bce_reference_loss(logits: Sequence[float], labels: TargetLabels | Sequence[bool]) -> float:
    """Sum over proposals of binary cross-entropy on sigmoid(logit)."""
    y = np.asarray(labels.labels if isinstance(labels, TargetLabels) else labels, dtype=np.float64)
    x = np.asarray(logits, dtype=np.float64)
    if x.shape != y.shape:
        raise LossError(f"{x.size} logits but {y.size} labels")
    # softplus(x) - x*y without overflow
    return float(np.sum(np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))))


def multiclass_reference_loss(logits: Sequence[float], target_index: int) -> float:
    x = np.asarray(logits, dtype=np.float64)
    if not 0 <= target_index < x.size:
        raise LossError(f"target index {target_index} out of range for {x.size} proposals")
    if x[target_index] == np.inf and np.sum(x == np.inf) == 1:
        return 0.0
    return float(_logsumexp(x, axis=0) - x[target_index])


def assign_training_targets(proposals: Sequence[Aabb], gts: Sequence[Aabb], strategy: Strategy | str,
                            tau_train: float = DEFAULT_TAU_TRAIN) -> TargetLabels:
    strategy = Strategy(strategy)
    if not 0.0 < tau_train < 1.0:
        raise LossError(f"tau_train must lie in (0, 1), got {tau_train}")
    labels = [False] * len(proposals)
    if proposals and gts:
        if strategy is Strategy.ALL:
            ious = pairwise_iou(*box_arrays(proposals), *box_arrays(gts))
            labels = [bool(v > tau_train) for v in ious.max(axis=1)]
        else:
            cost = build_cost_matrix(proposals, gts)
            for i, j in hungarian(cost).pairs:
                if i < cost.n_pred and j < cost.n_gt and -cost.entries[i, j] > tau_train:
                    labels[i] = True
    return TargetLabels(tuple(labels), strategy, float(tau_train))

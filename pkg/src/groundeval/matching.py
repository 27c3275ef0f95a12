"""Minimum-cost perfect matching on the negative-IoU cost matrix."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import Aabb, box_arrays

BRUTE_FORCE_LIMIT = 9
PADDING_COST = 0.0


class MatchingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Square ``n x n`` costs, ``n = max(n_pred, n_gt)``; rows are predictions.

    Cells outside the ``n_pred x n_gt`` block are padding and hold ``PADDING_COST``.
    """

    entries: np.ndarray
    n_pred: int
    n_gt: int

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise MatchingError(f"cost matrix must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def square(cls, entries) -> "CostMatrix":
        m = np.asarray(entries, dtype=np.float64)
        return cls(m, m.shape[0], m.shape[-1])


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    total_cost: float


def _total(entries: np.ndarray, cols: Sequence[int]) -> float:
    # row-order left fold, shared by every solver so equal matchings give equal totals
    total = 0.0
    for i, j in enumerate(cols):
        total += float(entries[i, j])
    return total


def _check_perfect(pairs: Sequence[tuple[int, int]], n: int) -> None:
    rows = sorted(i for i, _ in pairs)
    cols = sorted(j for _, j in pairs)
    if rows != list(range(n)) or cols != list(range(n)):
        raise AssertionError(f"solver returned a non-permutation: {pairs}")


def build_cost_matrix(pred_boxes: Sequence[Aabb], gt_boxes: Sequence[Aabb]) -> CostMatrix:
    n_pred, n_gt = len(pred_boxes), len(gt_boxes)
    if n_pred == 0 and n_gt == 0:
        raise MatchingError("nothing to match: no predictions and no ground truth")
    n = max(n_pred, n_gt)
    entries = np.full((n, n), PADDING_COST)
    if n_pred and n_gt:
        entries[:n_pred, :n_gt] = -kernels.pairwise_iou(*box_arrays(pred_boxes), *box_arrays(gt_boxes))
    return CostMatrix(entries, n_pred, n_gt)


def hungarian(cost: CostMatrix) -> Assignment:
    m = cost.entries
    if not np.all(np.isfinite(m)):
        raise MatchingError("cost matrix has non-finite entries")
    cols = [int(j) for j in kernels.hungarian(m)]
    pairs = tuple(enumerate(cols))
    _check_perfect(pairs, cost.n)
    return Assignment(pairs, _total(m, cols))


def brute_force_assignment(cost: CostMatrix) -> Assignment:
    """Exact optimum by enumerating all ``n!`` permutations (test oracle)."""
    m = cost.entries
    n = cost.n
    if n > BRUTE_FORCE_LIMIT:
        raise MatchingError(f"brute force limited to n <= {BRUTE_FORCE_LIMIT}, got {n}")
    if not np.all(np.isfinite(m)):
        raise MatchingError("cost matrix has non-finite entries")
    best_cols: tuple[int, ...] = ()
    best = math.inf
    for perm in itertools.permutations(range(n)):
        total = _total(m, perm)
        if total < best:
            best, best_cols = total, perm
    return Assignment(tuple(enumerate(best_cols)), best)


def matched_ious(cost: CostMatrix, assignment: Assignment) -> list[tuple[int, int, float]]:
    """``(pred, gt, iou)`` for matched cells that are not padding."""
    return [
        (i, j, -float(cost.entries[i, j]))
        for i, j in assignment.pairs
        if i < cost.n_pred and j < cost.n_gt
    ]

"""Axis-aligned boxes, IoU and point-cloud cropping."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

Vec3 = tuple[float, float, float]


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Aabb:
    """Closed axis-aligned box ``[min_corner, max_corner]`` in meters."""

    min_corner: Vec3
    max_corner: Vec3

    def __post_init__(self):
        lo = tuple(float(x) for x in self.min_corner)
        hi = tuple(float(x) for x in self.max_corner)
        if len(lo) != 3 or len(hi) != 3:
            raise GeometryError("box corners must be 3-vectors")
        if not all(np.isfinite(lo + hi)):
            raise GeometryError(f"non-finite box corner: {lo}, {hi}")
        if any(a > b for a, b in zip(lo, hi)):
            raise GeometryError(f"min corner {lo} exceeds max corner {hi}")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.min_corner) + np.asarray(self.max_corner)) / 2.0

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.max_corner) - np.asarray(self.min_corner)

    def translated(self, t: Sequence[float]) -> "Aabb":
        return Aabb(tuple(a + b for a, b in zip(self.min_corner, t)),
                    tuple(a + b for a, b in zip(self.max_corner, t)))

    def scaled(self, s: float) -> "Aabb":
        return Aabb(tuple(s * a for a in self.min_corner), tuple(s * a for a in self.max_corner))

    def to_json(self) -> dict:
        return {"min": list(self.min_corner), "max": list(self.max_corner)}

    @classmethod
    def from_json(cls, obj: dict) -> "Aabb":
        return cls(tuple(obj["min"]), tuple(obj["max"]))


def volume(box: Aabb) -> float:
    lo, hi = box.min_corner, box.max_corner
    return ((hi[0] - lo[0]) * (hi[1] - lo[1])) * (hi[2] - lo[2])


def iou(a: Aabb, b: Aabb) -> float:
    """Intersection over union; 0 whenever the union has no volume."""
    ext = []
    for k in range(3):
        d = min(a.max_corner[k], b.max_corner[k]) - max(a.min_corner[k], b.min_corner[k])
        ext.append(d if d > 0.0 else 0.0)
    inter = (ext[0] * ext[1]) * ext[2]
    union = (volume(a) + volume(b)) - inter
    return inter / union if union > 0.0 else 0.0


def box_arrays(boxes: Sequence[Aabb]) -> tuple[np.ndarray, np.ndarray]:
    """Stack boxes into ``(n, 3)`` min and max arrays."""
    lo = np.array([b.min_corner for b in boxes], dtype=np.float64).reshape(-1, 3)
    hi = np.array([b.max_corner for b in boxes], dtype=np.float64).reshape(-1, 3)
    return lo, hi


def aabb_from_points(points: Iterable[Sequence[float]] | np.ndarray) -> Aabb:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise GeometryError("cannot bound an empty point set")
    return Aabb(tuple(pts.min(axis=0)), tuple(pts.max(axis=0)))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """``N`` points with RGB colors in [0, 1] and optional unit normals."""

    positions: np.ndarray
    colors: np.ndarray
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        col = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if col.shape[0] != pos.shape[0]:
            raise GeometryError(f"{pos.shape[0]} positions but {col.shape[0]} colors")
        if col.size and (col.min() < 0.0 or col.max() > 1.0):
            raise GeometryError("color channels must lie in [0, 1]")
        nrm = self.normals
        if nrm is not None:
            nrm = np.asarray(nrm, dtype=np.float64).reshape(-1, 3)
            if nrm.shape[0] != pos.shape[0]:
                raise GeometryError(f"{pos.shape[0]} positions but {nrm.shape[0]} normals")
            if nrm.size and np.abs(np.linalg.norm(nrm, axis=1) - 1.0).max() > 1e-4:
                raise GeometryError("normals must have unit length")
            nrm.setflags(write=False)
        pos.setflags(write=False)
        col.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        object.__setattr__(self, "normals", nrm)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def select(self, mask_or_index) -> "PointCloud":
        return PointCloud(
            self.positions[mask_or_index],
            self.colors[mask_or_index],
            None if self.normals is None else self.normals[mask_or_index],
        )

    def equals(self, other: "PointCloud") -> bool:
        same_normals = (self.normals is None) == (other.normals is None) and (
            self.normals is None or np.array_equal(self.normals, other.normals)
        )
        return (np.array_equal(self.positions, other.positions)
                and np.array_equal(self.colors, other.colors) and same_normals)


def inside_mask(positions: np.ndarray, box: Aabb) -> np.ndarray:
    lo = np.asarray(box.min_corner)
    hi = np.asarray(box.max_corner)
    return np.all((positions >= lo) & (positions <= hi), axis=1)


def crop(cloud: PointCloud, box: Aabb) -> PointCloud:
    """Points inside the closed box, in their original order."""
    return cloud.select(inside_mask(cloud.positions, box))

"""Multi-view point-splat rendering of box-cropped point clouds.

Cameras orbit the box center at a fixed distance and elevation, evenly spaced
in azimuth, looking at the center with world +z up. Points are projected with
a pinhole model and drawn as depth-tested discs of a fixed world radius.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .geometry import Aabb, GeometryError, PointCloud, crop
from .io import atomic_write_bytes

CLEAR_COLOR = (128, 128, 128)
NEAR_PLANE = 1e-6


@dataclass(frozen=True)
class CameraPose:
    eye: tuple[float, float, float]
    target: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    vertical_fov: float = 60.0

    def __post_init__(self):
        eye, target, up = (np.asarray(x, dtype=np.float64) for x in (self.eye, self.target, self.up))
        view = target - eye
        if not np.linalg.norm(view) > 0:
            raise GeometryError("camera eye coincides with its target")
        if np.linalg.norm(np.cross(view, up)) <= 1e-12 * np.linalg.norm(view) * np.linalg.norm(up):
            raise GeometryError("camera up vector is parallel to the view direction")
        if not 0.0 < self.vertical_fov < 180.0:
            raise GeometryError(f"vertical field of view must be in (0, 180), got {self.vertical_fov}")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(right, up, forward)`` orthonormal camera axes."""
        eye = np.asarray(self.eye, dtype=np.float64)
        forward = np.asarray(self.target, dtype=np.float64) - eye
        forward = forward / np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(self.up, dtype=np.float64))
        right = right / np.linalg.norm(right)
        return right, np.cross(right, forward), forward

    def focal_px(self, height: int) -> float:
        return (height / 2.0) / math.tan(math.radians(self.vertical_fov) / 2.0)


@dataclass(frozen=True)
class RenderConfig:
    n_views: int = 3
    elevation_deg: float = 45.0
    distance_m: float = 1.0
    point_radius_m: float = 0.025
    size_px: int = 224
    vertical_fov: float = 60.0
    aim: str = "box_center"  # or "centroid"


@dataclass(eq=False)
class ImageBuffer:
    width: int
    height: int
    rgb: np.ndarray  # (height, width, 3) uint8
    depth: np.ndarray  # (height, width) float64, inf on background
    point_index: np.ndarray = field(default=None)  # (height, width) int64, -1 on background

    def covered(self) -> np.ndarray:
        return np.isfinite(self.depth)

    def to_ppm(self) -> bytes:
        return f"P6\n{self.width} {self.height}\n255\n".encode("ascii") + np.ascontiguousarray(
            self.rgb, dtype=np.uint8).tobytes()


def make_cameras(box: Aabb, n_views: int = 3, elevation_deg: float = 45.0, distance_m: float = 1.0,
                 vertical_fov: float = 60.0, center: Optional[np.ndarray] = None) -> list[CameraPose]:
    """Evenly spaced orbit cameras at azimuths ``k * 360 / n_views`` degrees."""
    if not np.linalg.norm(box.extent) > 0:
        raise GeometryError("cannot place cameras around a degenerate box")
    if n_views < 1:
        raise ValueError("need at least one view")
    c = box.center if center is None else np.asarray(center, dtype=np.float64)
    el = math.radians(elevation_deg)
    poses = []
    for k in range(n_views):
        az = math.radians(k * 360.0 / n_views)
        offset = distance_m * np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
        poses.append(CameraPose(tuple(c + offset), tuple(c), (0.0, 0.0, 1.0), vertical_fov))
    return poses


def project(positions: np.ndarray, camera: CameraPose, size_px: int, point_radius_m: float):
    """Pixel coordinates ``(u, v)``, camera depth, pixel radius and visibility per point.

    ``u`` grows to the right and ``v`` downward; pixel ``(row, col)`` has its
    center at ``(col + 0.5, row + 0.5)``.
    """
    right, up, forward = camera.basis()
    rel = np.asarray(positions, dtype=np.float64).reshape(-1, 3) - np.asarray(camera.eye)
    x, y, z = rel @ right, rel @ up, rel @ forward
    visible = z > NEAR_PLANE
    safe_z = np.where(visible, z, 1.0)
    f = camera.focal_px(size_px)
    u = size_px / 2.0 + f * x / safe_z
    v = size_px / 2.0 - f * y / safe_z
    radius = np.maximum(f * point_radius_m / safe_z, 1.0)
    return u, v, z, radius, visible


def render(cloud: PointCloud, camera: CameraPose, point_radius_m: float = 0.025, size_px: int = 224,
           clear_color: tuple[int, int, int] = CLEAR_COLOR) -> ImageBuffer:
    u, v, z, radius, visible = project(cloud.positions, camera, size_px, point_radius_m)
    zbuf, index = kernels.splat(u, v, z, radius, visible, size_px, size_px)
    rgb = np.empty((size_px, size_px, 3), dtype=np.uint8)
    rgb[...] = np.asarray(clear_color, dtype=np.uint8)
    hit = index >= 0
    colors = np.round(cloud.colors * 255.0).astype(np.uint8)
    rgb[hit] = colors[index[hit]]
    return ImageBuffer(size_px, size_px, rgb, zbuf, index)


def render_proposal(scene_cloud: PointCloud, box: Aabb, config: RenderConfig = RenderConfig()) -> list[ImageBuffer]:
    """Crop the scene to ``box`` and render it from each orbit camera."""
    cropped = crop(scene_cloud, box)
    center = None
    if config.aim == "centroid" and len(cropped):
        center = cropped.positions.mean(axis=0)
    cams = make_cameras(box, config.n_views, config.elevation_deg, config.distance_m, config.vertical_fov, center)
    return [render(cropped, cam, config.point_radius_m, config.size_px) for cam in cams]


def write_image(img: ImageBuffer, path: str | Path) -> None:
    """Binary PPM (P6, maxval 255)."""
    atomic_write_bytes(path, img.to_ppm())


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P6" or int(fields[3]) != 255:
        raise ValueError("expected a P6 PPM with maxval 255")
    w, h = int(fields[1]), int(fields[2])
    payload = data[pos + 1:pos + 1 + 3 * w * h]
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)

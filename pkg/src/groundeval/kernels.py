"""Hot-loop kernels, backed by the compiled ``_core`` extension when it is built.

If the extension is missing (source checkout without a build, or a platform
without a C compiler), the numpy implementations in ``_fallback`` are used.
Both backends give bit-identical results.
"""
from __future__ import annotations

from types import ModuleType

import numpy as np

from . import _fallback

try:
    from . import _core as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

BACKENDS: dict[str, ModuleType] = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

_active: ModuleType = _compiled if _compiled is not None else _fallback


def backend() -> str:
    """Name of the backend currently in use."""
    return "compiled" if _active is _compiled else "python"


def use_backend(name: str) -> None:
    global _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    _active = BACKENDS[name]


def hungarian(cost: np.ndarray) -> np.ndarray:
    return _active.hungarian(np.ascontiguousarray(cost, dtype=np.float64))


def pairwise_iou(a_min, a_max, b_min, b_max) -> np.ndarray:
    as_c = lambda x: np.ascontiguousarray(x, dtype=np.float64).reshape(-1, 3)  # noqa: E731
    return _active.pairwise_iou(as_c(a_min), as_c(a_max), as_c(b_min), as_c(b_max))


def splat(u, v, depth, radius, visible, width: int, height: int):
    as_c = lambda x: np.ascontiguousarray(x, dtype=np.float64)  # noqa: E731
    return _active.splat(
        as_c(u), as_c(v), as_c(depth), as_c(radius),
        np.ascontiguousarray(visible, dtype=np.uint8), int(width), int(height),
    )

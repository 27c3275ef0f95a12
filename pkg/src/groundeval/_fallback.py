"""Pure numpy versions of the compiled kernels in ``_core.pyx``.

The arithmetic is ordered exactly as in the compiled code so the two
backends agree bit for bit; ``tests/test_kernels.py`` checks that.
"""
from __future__ import annotations

import numpy as np


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Return ``assignment`` with ``assignment[row] = column`` minimising total cost."""
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.intp)
    way = np.zeros(n + 1, dtype=np.intp)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            cur = np.full(n + 1, np.inf)
            cur[1:] = (cost[i0 - 1] - u[i0]) - v[1:]
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = np.empty(n, dtype=np.intp)
    assignment[p[1:] - 1] = np.arange(n)
    return assignment


def pairwise_iou(a_min, a_max, b_min, b_max) -> np.ndarray:
    ea = a_max - a_min
    eb = b_max - b_min
    va = (ea[:, 0] * ea[:, 1]) * ea[:, 2]
    vb = (eb[:, 0] * eb[:, 1]) * eb[:, 2]
    d = np.minimum(a_max[:, None, :], b_max[None, :, :]) - np.maximum(a_min[:, None, :], b_min[None, :, :])
    d = np.where(d > 0.0, d, 0.0)
    inter = (d[..., 0] * d[..., 1]) * d[..., 2]
    union = (va[:, None] + vb[None, :]) - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)


def splat(u, v, depth, radius, visible, width: int, height: int):
    """Z-buffered disc rasterisation; returns ``(zbuf, index)`` of shape (height, width).

    Instead of a sequential z-buffer, every (point, pixel) fragment is
    generated and the nearest one per pixel kept, ties going to the lowest
    point index. That is the same winner a sequential strict ``<`` test picks.
    """
    zbuf = np.full((height, width), np.inf)
    index = np.full((height, width), -1, dtype=np.int64)
    keep = np.flatnonzero(np.asarray(visible, dtype=bool))
    if keep.size == 0:
        return zbuf, index
    u, v, depth, r = u[keep], v[keep], depth[keep], radius[keep]
    c_lo, c_hi = np.floor(u - r - 0.5), np.ceil(u + r - 0.5)
    r_lo, r_hi = np.floor(v - r - 0.5), np.ceil(v + r - 0.5)
    on = (c_hi >= 0) & (c_lo <= width - 1) & (r_hi >= 0) & (r_lo <= height - 1)
    keep, u, v, depth, r = keep[on], u[on], v[on], depth[on], r[on]
    if keep.size == 0:
        return zbuf, index
    c_lo = np.clip(c_lo[on], 0, width - 1).astype(np.int64)
    c_hi = np.clip(c_hi[on], 0, width - 1).astype(np.int64)
    r_lo = np.clip(r_lo[on], 0, height - 1).astype(np.int64)
    r_hi = np.clip(r_hi[on], 0, height - 1).astype(np.int64)

    w = c_hi - c_lo + 1
    counts = w * (r_hi - r_lo + 1)
    owner = np.repeat(np.arange(keep.size), counts)
    offset = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    col = c_lo[owner] + offset % w[owner]
    row = r_lo[owner] + offset // w[owner]
    dx = (col + 0.5) - u[owner]
    dy = (row + 0.5) - v[owner]
    rr = r[owner]
    hit = dx * dx + dy * dy <= rr * rr
    owner, col, row = owner[hit], col[hit], row[hit]

    pixel = row * width + col
    frag_depth = depth[owner]
    frag_index = keep[owner]
    order = np.lexsort((frag_index, frag_depth, pixel))
    pixel, frag_depth, frag_index = pixel[order], frag_depth[order], frag_index[order]
    first = np.ones(pixel.size, dtype=bool)
    first[1:] = pixel[1:] != pixel[:-1]
    zbuf.ravel()[pixel[first]] = frag_depth[first]
    index.ravel()[pixel[first]] = frag_index[first]
    return zbuf, index

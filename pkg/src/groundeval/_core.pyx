# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled kernels: Kuhn-Munkres solver, pairwise box IoU and point splatting.

Every routine mirrors ``_fallback`` operation-for-operation so both backends
return bit-identical results.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, floor, ceil

cnp.import_array()


def hungarian(const double[:, ::1] cost):
    """Return ``assignment`` with ``assignment[row] = column`` minimising total cost."""
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur
    u_arr = np.zeros(n + 1, dtype=np.float64)
    v_arr = np.zeros(n + 1, dtype=np.float64)
    minv_arr = np.empty(n + 1, dtype=np.float64)
    p_arr = np.zeros(n + 1, dtype=np.intp)
    way_arr = np.zeros(n + 1, dtype=np.intp)
    used_arr = np.zeros(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] minv = minv_arr
    cdef Py_ssize_t[::1] p = p_arr
    cdef Py_ssize_t[::1] way = way_arr
    cdef unsigned char[::1] used = used_arr

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
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
    cdef Py_ssize_t[::1] a = assignment
    for j in range(1, n + 1):
        a[p[j] - 1] = j - 1
    return assignment


def pairwise_iou(const double[:, ::1] a_min, const double[:, ::1] a_max,
                 const double[:, ::1] b_min, const double[:, ::1] b_max):
    cdef Py_ssize_t na = a_min.shape[0]
    cdef Py_ssize_t nb = b_min.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double d, inter, union_, va, vb
    cdef double ext[3]
    out_arr = np.zeros((na, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(na):
        va = ((a_max[i, 0] - a_min[i, 0]) * (a_max[i, 1] - a_min[i, 1])) * (a_max[i, 2] - a_min[i, 2])
        for j in range(nb):
            vb = ((b_max[j, 0] - b_min[j, 0]) * (b_max[j, 1] - b_min[j, 1])) * (b_max[j, 2] - b_min[j, 2])
            for k in range(3):
                d = min(a_max[i, k], b_max[j, k]) - max(a_min[i, k], b_min[j, k])
                ext[k] = d if d > 0.0 else 0.0
            inter = (ext[0] * ext[1]) * ext[2]
            union_ = (va + vb) - inter
            out[i, j] = inter / union_ if union_ > 0.0 else 0.0
    return out_arr


def splat(const double[::1] u, const double[::1] v, const double[::1] depth,
          const double[::1] radius, const unsigned char[::1] visible,
          Py_ssize_t width, Py_ssize_t height):
    """Z-buffered disc rasterisation; returns ``(zbuf, index)`` of shape (height, width)."""
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t k, row, col, c_lo, c_hi, r_lo, r_hi
    cdef double r, dx, dy, lo, hi
    zbuf_arr = np.full((height, width), np.inf, dtype=np.float64)
    index_arr = np.full((height, width), -1, dtype=np.int64)
    cdef double[:, ::1] zbuf = zbuf_arr
    cdef long long[:, ::1] index = index_arr
    for k in range(n):
        if not visible[k]:
            continue
        r = radius[k]
        lo = floor(u[k] - r - 0.5)
        hi = ceil(u[k] + r - 0.5)
        if hi < 0.0 or lo > width - 1:
            continue
        c_lo = <Py_ssize_t>lo if lo > 0.0 else 0
        c_hi = <Py_ssize_t>hi if hi < width - 1 else width - 1
        lo = floor(v[k] - r - 0.5)
        hi = ceil(v[k] + r - 0.5)
        if hi < 0.0 or lo > height - 1:
            continue
        r_lo = <Py_ssize_t>lo if lo > 0.0 else 0
        r_hi = <Py_ssize_t>hi if hi < height - 1 else height - 1
        for row in range(r_lo, r_hi + 1):
            dy = (row + 0.5) - v[k]
            for col in range(c_lo, c_hi + 1):
                dx = (col + 0.5) - u[k]
                if dx * dx + dy * dy <= r * r and depth[k] < zbuf[row, col]:
                    zbuf[row, col] = depth[k]
                    index[row, col] = k
    return zbuf_arr, index_arr

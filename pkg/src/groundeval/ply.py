"""Minimal PLY point-cloud reader/writer (ASCII and binary little-endian)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import PointCloud
from .io import atomic_write_bytes

_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


class PlyError(ValueError):
    pass


def _parse_header(f):
    if f.readline().strip() != b"ply":
        raise PlyError("not a PLY file")
    fmt = None
    elements: list[tuple[str, int, list[tuple[str, str | tuple]]]] = []
    while True:
        line = f.readline()
        if not line:
            raise PlyError("unterminated header")
        words = line.decode("ascii", "replace").split()
        if not words or words[0] in ("comment", "obj_info"):
            continue
        if words[0] == "format":
            fmt = words[1]
        elif words[0] == "element":
            elements.append((words[1], int(words[2]), []))
        elif words[0] == "property":
            if not elements:
                raise PlyError("property before any element")
            if words[1] == "list":
                elements[-1][2].append((words[4], ("list", words[2], words[3])))
            else:
                if words[1] not in _TYPES:
                    raise PlyError(f"unknown property type {words[1]!r}")
                elements[-1][2].append((words[2], words[1]))
        elif words[0] == "end_header":
            break
    if fmt not in ("ascii", "binary_little_endian"):
        raise PlyError(f"unsupported PLY format {fmt!r}")
    return fmt, elements


def read_ply(path: str | Path) -> PointCloud:
    """Read vertices with x,y,z and red,green,blue; other properties are skipped."""
    with open(path, "rb") as f:
        fmt, elements = _parse_header(f)
        vertex = None
        if fmt == "ascii":
            lines = f.read().decode("ascii").split("\n")
            cursor = 0
            for name, count, props in elements:
                if name == "vertex":
                    rows = [ln.split() for ln in lines[cursor:cursor + count]]
                    if any(isinstance(t, tuple) for _, t in props):
                        raise PlyError("list properties on vertices are not supported")
                    vertex = {p: np.array([float(r[k]) for r in rows]) for k, (p, _) in enumerate(props)}
                    vertex["_types"] = dict(props)
                    break
                cursor += count
        else:
            for name, count, props in elements:
                if any(isinstance(t, tuple) for _, t in props):
                    if name == "vertex":
                        raise PlyError("list properties on vertices are not supported")
                    raise PlyError(f"cannot skip list element {name!r} preceding the vertices")
                dtype = np.dtype([(p, "<" + _TYPES[t]) for p, t in props])
                data = np.frombuffer(f.read(dtype.itemsize * count), dtype=dtype, count=count)
                if name == "vertex":
                    vertex = {p: data[p].astype(np.float64) for p, _ in props}
                    vertex["_types"] = dict(props)
                    break
    if vertex is None:
        raise PlyError("no vertex element")
    for p in ("x", "y", "z"):
        if p not in vertex:
            raise PlyError(f"vertex property {p!r} missing")
    pos = np.stack([vertex["x"], vertex["y"], vertex["z"]], axis=1)
    if all(c in vertex for c in ("red", "green", "blue")):
        col = np.stack([vertex["red"], vertex["green"], vertex["blue"]], axis=1)
        if _TYPES.get(vertex["_types"]["red"], "f")[0] != "f":
            col = col / float(np.iinfo(np.dtype(_TYPES[vertex["_types"]["red"]])).max)
        col = np.clip(col, 0.0, 1.0)
    else:
        col = np.full_like(pos, 0.5)
    normals = None
    if all(c in vertex for c in ("nx", "ny", "nz")):
        nrm = np.stack([vertex["nx"], vertex["ny"], vertex["nz"]], axis=1)
        lengths = np.linalg.norm(nrm, axis=1, keepdims=True)
        if np.all(lengths > 0):
            normals = nrm / lengths
    return PointCloud(pos, col, normals)


def write_ply(cloud: PointCloud, path: str | Path, binary: bool = True) -> None:
    n = len(cloud)
    rgb = np.round(cloud.colors * 255.0).astype(np.uint8)
    props = [("x", "double"), ("y", "double"), ("z", "double")]
    if cloud.normals is not None:
        props += [("nx", "double"), ("ny", "double"), ("nz", "double")]
    props += [("red", "uchar"), ("green", "uchar"), ("blue", "uchar")]
    header = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0", f"element vertex {n}"]
    header += [f"property {t} {p}" for p, t in props] + ["end_header"]
    head = ("\n".join(header) + "\n").encode("ascii")
    dtype = np.dtype([(p, "<" + _TYPES[t]) for p, t in props])
    data = np.zeros(n, dtype=dtype)
    for k, p in enumerate("xyz"):
        data[p] = cloud.positions[:, k]
        if cloud.normals is not None:
            data["n" + p] = cloud.normals[:, k]
    for k, p in enumerate(("red", "green", "blue")):
        data[p] = rgb[:, k]
    if binary:
        body = data.tobytes()
    else:
        body = "".join(" ".join(repr(v) for v in row.item()) + "\n" for row in data).encode("ascii")
    atomic_write_bytes(path, head + body)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundeval.geometry import Aabb, GeometryError, PointCloud, aabb_from_points, crop, iou, volume


def unit(shift=(0.0, 0.0, 0.0)):
    return Aabb((0, 0, 0), (1, 1, 1)).translated(shift)


coords = st.floats(-50, 50, allow_nan=False)


@st.composite
def boxes(draw, min_size=0.0):
    lo = [draw(coords) for _ in range(3)]
    size = [draw(st.floats(min_size, 10, allow_nan=False)) for _ in range(3)]
    return Aabb(tuple(lo), tuple(a + s for a, s in zip(lo, size)))


def test_volume_examples():
    assert volume(unit()) == 1.0
    assert volume(Aabb((1, 2, 3), (1, 2, 3))) == 0.0
    assert volume(Aabb((0, 0, 0), (2, 1, 0.5))) == 1.0


def test_invalid_box_rejected():
    with pytest.raises(GeometryError):
        Aabb((1, 0, 0), (0, 1, 1))


def test_iou_examples():
    assert iou(unit(), unit()) == 1.0
    assert iou(unit(), unit((2, 0, 0))) == 0.0
    assert iou(unit(), unit((0.5, 0, 0))) == pytest.approx(1 / 3, abs=1e-15)


def test_iou_degenerate():
    p = Aabb((1, 1, 1), (1, 1, 1))
    assert iou(p, p) == 0.0
    assert iou(p, unit()) == 0.0
    flat = Aabb((0, 0, 0), (1, 1, 0))
    assert iou(flat, unit()) == 0.0


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes(min_size=1e-3))
def test_iou_self(a):
    assert iou(a, a) == 1.0


@given(boxes(min_size=0.1), boxes(min_size=0.1), st.tuples(coords, coords, coords))
def test_iou_translation_invariant(a, b, t):
    # translate by values representable without rounding relative to the box coords
    t = tuple(float(np.round(x)) for x in t)
    assert iou(a.translated(t), b.translated(t)) == pytest.approx(iou(a, b), rel=1e-12, abs=1e-12)


@given(boxes(min_size=0.1), boxes(min_size=0.1), st.sampled_from([0.5, 2.0, 4.0, 0.25]))
def test_iou_scale_invariant(a, b, s):
    assert iou(a.scaled(s), b.scaled(s)) == pytest.approx(iou(a, b), rel=1e-12, abs=1e-12)


def monte_carlo_iou(a, b, rng, n=100_000):
    """Sample the joint bounding box; estimate |a&b| / |a|b| from hit counts."""
    lo = np.minimum(a.min_corner, b.min_corner)
    hi = np.maximum(a.max_corner, b.max_corner)
    pts = rng.uniform(lo, hi, size=(n, 3))
    in_a = np.all((pts >= a.min_corner) & (pts <= a.max_corner), axis=1)
    in_b = np.all((pts >= b.min_corner) & (pts <= b.max_corner), axis=1)
    inter = np.count_nonzero(in_a & in_b)
    union = np.count_nonzero(in_a | in_b)
    est = inter / union
    sigma = np.sqrt(est * (1 - est) / union)
    return est, sigma


def test_iou_against_monte_carlo():
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = Aabb(tuple(rng.uniform(0, 1, 3)), tuple(rng.uniform(1.2, 2, 3)))
        b = Aabb(tuple(rng.uniform(0.5, 1.5, 3)), tuple(rng.uniform(1.6, 2.5, 3)))
        est, sigma = monte_carlo_iou(a, b, rng)
        assert abs(iou(a, b) - est) <= 3 * sigma + 1e-12


def test_aabb_from_points():
    assert aabb_from_points([(0, 0, 0), (1, 2, 3)]) == Aabb((0, 0, 0), (1, 2, 3))
    assert aabb_from_points([(1, 2, 3)]) == Aabb((1, 2, 3), (1, 2, 3))
    with pytest.raises(GeometryError):
        aabb_from_points([])


def test_aabb_from_points_tight():
    pts = np.random.default_rng(1).normal(size=(100, 3))
    box = aabb_from_points(pts)
    assert np.all(pts >= box.min_corner) and np.all(pts <= box.max_corner)
    for k in range(3):
        assert np.any(pts[:, k] == box.min_corner[k])
        assert np.any(pts[:, k] == box.max_corner[k])


def make_cloud(n=200, seed=0, normals=False):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-1, 1, size=(n, 3))
    nrm = None
    if normals:
        nrm = rng.normal(size=(n, 3))
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return PointCloud(pos, rng.uniform(0, 1, size=(n, 3)), nrm)


def test_point_cloud_invariants():
    with pytest.raises(GeometryError):
        PointCloud(np.zeros((3, 3)), np.zeros((2, 3)))
    with pytest.raises(GeometryError):
        PointCloud(np.zeros((1, 3)), np.full((1, 3), 1.5))
    with pytest.raises(GeometryError):
        PointCloud(np.zeros((1, 3)), np.zeros((1, 3)), np.array([[2.0, 0, 0]]))


def test_crop_superset_and_disjoint():
    cloud = make_cloud(normals=True)
    assert crop(cloud, Aabb((-2, -2, -2), (2, 2, 2))).equals(cloud)
    assert len(crop(cloud, Aabb((5, 5, 5), (6, 6, 6)))) == 0


def test_crop_closed_boundary():
    cloud = PointCloud([[0, 0, 0], [1, 1, 1], [1.0000001, 0, 0]], np.zeros((3, 3)))
    assert len(crop(cloud, Aabb((0, 0, 0), (1, 1, 1)))) == 2


def test_crop_containment_and_order():
    cloud = make_cloud(500, seed=3, normals=True)
    box = Aabb((-0.5, -0.2, -1.0), (0.3, 0.6, 0.1))
    out = crop(cloud, box)
    inside = [i for i, p in enumerate(cloud.positions) if all(box.min_corner[k] <= p[k] <= box.max_corner[k]
                                                              for k in range(3))]
    assert np.array_equal(out.positions, cloud.positions[inside])
    assert np.array_equal(out.normals, cloud.normals[inside])
    hull = aabb_from_points(out.positions)
    assert all(box.min_corner[k] <= hull.min_corner[k] and hull.max_corner[k] <= box.max_corner[k] for k in range(3))
    assert crop(out, box).equals(out)
    # tight box round-trip keeps every point
    assert crop(out, hull).equals(out)

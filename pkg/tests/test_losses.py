import math

import numpy as np
import pytest

from groundeval.geometry import Aabb, iou
from groundeval.losses import (FeatureBatch, LossError, Strategy, assign_training_targets, bce_reference_loss,
                               contrastive_grad, contrastive_loss, finite_difference_grad, gradient_selftest,
                               multiclass_reference_loss, relative_error)


def naive_direction_losses(S, O, tau):
    """Direct transcription of the two softmax terms with explicit loops."""
    n = S.shape[0]
    cos = lambda a, b: float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))  # noqa: E731
    o2s = s2o = 0.0
    for i in range(n):
        o2s += -math.log(math.exp(cos(O[i], S[i]) / tau) / sum(math.exp(cos(O[i], S[j]) / tau) for j in range(n)))
        s2o += -math.log(math.exp(cos(S[i], O[i]) / tau) / sum(math.exp(cos(S[i], O[j]) / tau) for j in range(n)))
    return o2s / n, s2o / n


def test_feature_batch_validation():
    with pytest.raises(LossError):
        FeatureBatch(np.zeros((2, 3)), np.ones((2, 3)))
    with pytest.raises(LossError):
        FeatureBatch(np.ones((2, 3)), np.ones((3, 3)))
    with pytest.raises(LossError):
        FeatureBatch(np.ones((2, 3)), np.ones((2, 3)), temperature=0.0)
    assert FeatureBatch(np.ones((1, 1)), np.ones((1, 1))).temperature == 0.07


def test_contrastive_examples():
    x = np.array([[0.3, -1.2, 2.0]])
    total, parts = contrastive_loss(FeatureBatch(x, x))
    assert total == 0.0 and parts == {"o2s": 0.0, "s2o": 0.0}

    eye = np.eye(2)
    total, parts = contrastive_loss(FeatureBatch(eye, eye, 1.0))
    want = -math.log(math.e / (math.e + 1))
    assert want == pytest.approx(0.31326, abs=1e-5)
    assert parts["o2s"] == pytest.approx(want, abs=1e-14)
    assert parts["s2o"] == pytest.approx(want, abs=1e-14)


def test_contrastive_matches_naive_formula():
    rng = np.random.default_rng(0)
    for tau in (0.05, 0.5, 1.0):
        S, O = rng.normal(size=(5, 7)), rng.normal(size=(5, 7))
        total, parts = contrastive_loss(FeatureBatch(S, O, tau))
        o2s, s2o = naive_direction_losses(S, O, tau)
        assert parts["o2s"] == pytest.approx(o2s, rel=1e-10)
        assert parts["s2o"] == pytest.approx(s2o, rel=1e-10)
        assert total == pytest.approx((o2s + s2o) / 2, rel=1e-10)


def test_directions_equal_when_cosines_symmetric():
    S = np.random.default_rng(1).normal(size=(6, 4))
    _, parts = contrastive_loss(FeatureBatch(S, S * 3.0, 0.2))
    assert parts["o2s"] == pytest.approx(parts["s2o"], abs=1e-12)


def test_low_temperature_is_stable():
    rng = np.random.default_rng(2)
    total, parts = contrastive_loss(FeatureBatch(rng.normal(size=(8, 4)), rng.normal(size=(8, 4)), 1e-4))
    assert np.isfinite(total) and parts["o2s"] >= 0 and parts["s2o"] >= 0


def test_scale_invariance_and_non_negative():
    rng = np.random.default_rng(3)
    for _ in range(20):
        S, O = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        base, parts = contrastive_loss(FeatureBatch(S, O, 0.1))
        assert parts["o2s"] >= 0 and parts["s2o"] >= 0
        for s in (0.1, 10.0):
            row = np.ones((4, 1))
            row[rng.integers(4)] = s
            assert abs(contrastive_loss(FeatureBatch(S * row, O, 0.1))[0] - base) < 1e-9
            assert abs(contrastive_loss(FeatureBatch(S, O * s, 0.1))[0] - base) < 1e-9


def test_gradient_single_row_is_zero():
    gs, go = contrastive_grad(FeatureBatch(np.array([[1.0, 2.0]]), np.array([[0.5, -1.0]])))
    assert np.all(gs == 0) and np.all(go == 0)


def test_gradient_orthonormal_batch():
    eye = np.eye(2)
    batch = FeatureBatch(eye, eye, 1.0)
    gs, go = contrastive_grad(batch)
    fs, fo = finite_difference_grad(batch)
    assert relative_error(gs, fs) < 1e-6 and relative_error(go, fo) < 1e-6
    # scale invariance: gradient is orthogonal to each feature row
    assert np.allclose(np.sum(gs * eye, axis=1), 0.0)
    assert np.allclose(np.sum(go * eye, axis=1), 0.0)
    # swapping the two rows maps the gradient onto itself
    assert np.allclose(gs[::-1, ::-1], gs)


def test_gradient_matches_finite_differences_n4_d8():
    rng = np.random.default_rng(4)
    batch = FeatureBatch(rng.normal(size=(4, 8)), rng.normal(size=(4, 8)), 0.07)
    gs, go = contrastive_grad(batch)
    fs, fo = finite_difference_grad(batch, h=1e-5)
    assert relative_error(gs, fs) < 1e-4
    assert relative_error(go, fo) < 1e-4


def test_gradient_selftest_small():
    records = gradient_selftest(n_batches=12, seed=1)
    assert max(r["rel_error"] for r in records) < 1e-4
    assert {r["temperature"] for r in records} == {0.05, 0.5, 1.0}


def test_bce_examples():
    labels = [True, False, True]
    assert bce_reference_loss([20, -20, 20], labels) < 1e-6
    assert bce_reference_loss([0.0], [True]) == pytest.approx(math.log(2), abs=1e-15)
    logits = [0.3, -1.1, 2.5]
    assert bce_reference_loss(logits * 2, labels * 2) == pytest.approx(2 * bce_reference_loss(logits, labels))
    with pytest.raises(LossError):
        bce_reference_loss([0.0, 1.0], [True])


def test_bce_stable_and_additive():
    x = np.array([800.0, -800.0, 3.0, -0.5])
    y = [False, True, True, False]
    total = bce_reference_loss(x, y)
    assert np.isfinite(total)
    assert total == pytest.approx(800 + 800 + math.log1p(math.exp(-3)) + math.log1p(math.exp(-0.5)), rel=1e-12)
    assert total == bce_reference_loss(x[:2], y[:2]) + bce_reference_loss(x[2:], y[2:])


def test_multiclass_examples():
    for k in (1, 2, 5, 17):
        assert multiclass_reference_loss([0.7] * k, 0) == pytest.approx(math.log(k), abs=1e-14)
    assert multiclass_reference_loss([0.0, 0.0], 0) == pytest.approx(math.log(2), abs=1e-15)
    assert multiclass_reference_loss([1e4, 0.0, -3.0], 0) == 0.0
    assert multiclass_reference_loss([np.inf, 0.0], 0) == 0.0
    with pytest.raises(LossError):
        multiclass_reference_loss([0.0, 1.0], 2)


def cube(x0):
    return Aabb((x0, 0, 0), (x0 + 1, 1, 1))


def shift_for(target_iou):
    # unit cubes offset along x by s overlap with IoU (1 - s) / (1 + s)
    return (1 - target_iou) / (1 + target_iou)


def test_assignment_strategies_example():
    gt = cube(0)
    props = [cube(shift_for(0.6)), cube(-shift_for(0.55))]
    assert iou(props[0], gt) == pytest.approx(0.6) and iou(props[1], gt) == pytest.approx(0.55)
    assert assign_training_targets(props, [gt], "all", 0.5).labels == (True, True)
    assert assign_training_targets(props, [gt], Strategy.HUNGARIAN, 0.5).labels == (True, False)


def test_assignment_below_threshold_and_empty():
    props = [cube(0.9), cube(5)]
    for s in Strategy:
        assert assign_training_targets(props, [cube(0)], s, 0.5).labels == (False, False)
        assert assign_training_targets(props, [], s, 0.5).labels == (False, False)
    with pytest.raises(LossError):
        assign_training_targets(props, [cube(0)], "all", 1.0)


def test_hungarian_positives_subset_of_all():
    rng = np.random.default_rng(6)
    strict_seen = False
    for _ in range(200):
        gts = [cube(float(x)) for x in rng.uniform(0, 4, rng.integers(0, 4))]
        props = [cube(float(x)) for x in rng.uniform(-0.5, 4.5, rng.integers(0, 7))]
        tau = float(rng.choice([0.25, 0.5]))
        a = assign_training_targets(props, gts, "all", tau).positives()
        h = assign_training_targets(props, gts, "hungarian", tau)
        assert h.positives() <= a
        strict_seen |= h.positives() < a
        # at most one positive per GT under Hungarian
        assert len(h.positives()) <= len(gts)
    assert strict_seen

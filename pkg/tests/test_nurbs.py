import numpy as np
import pytest

from scatteruq.nurbs import PatchMap, bezier_knots, bspline_basis, patch_eval


def bilinear_patch():
    ctrl = np.array([[[0.0, 0, 0], [0, 1, 0]], [[1, 0, 0], [1, 1, 0]]])
    return PatchMap((1, 1), bezier_knots(1), bezier_knots(1), ctrl, np.ones((2, 2)))


def quarter_cylinder_patch():
    # quarter circle in x-y as an exact degree-2 rational arc, extruded in z
    w = np.sqrt(0.5)
    arc = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    ctrl = np.empty((3, 2, 3))
    for j, z in enumerate((0.0, 1.0)):
        ctrl[:, j, 0] = arc[:, 0]
        ctrl[:, j, 1] = arc[:, 1]
        ctrl[:, j, 2] = z
    weights = np.array([[1.0, 1.0], [w, w], [1.0, 1.0]])
    return PatchMap((2, 1), bezier_knots(2), bezier_knots(1), ctrl, weights)


def test_bilinear_patch_is_identity_on_xy():
    patch = bilinear_patch()
    for s, t in [(0.0, 0.0), (0.3, 0.8), (1.0, 1.0), (0.5, 0.25)]:
        np.testing.assert_allclose(patch_eval(patch, s, t), [s, t, 0.0], atol=1e-15)


def test_quarter_circle_exact_on_unit_circle():
    patch = quarter_cylinder_patch()
    for s in np.linspace(0, 1, 17):
        x, y, _ = patch_eval(patch, s, 0.7)
        assert abs(x * x + y * y - 1.0) <= 1e-12


def test_parameters_outside_square_rejected():
    patch = bilinear_patch()
    with pytest.raises(ValueError):
        patch_eval(patch, 1.2, 0.5)
    with pytest.raises(ValueError):
        patch_eval(patch, 0.5, -0.1)


def test_weights_must_be_positive():
    ctrl = np.zeros((2, 2, 3))
    weights = np.array([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        PatchMap((1, 1), bezier_knots(1), bezier_knots(1), ctrl, weights)


def test_knot_vector_must_be_nondecreasing():
    ctrl = np.random.default_rng(0).normal(size=(2, 2, 3))
    bad = np.array([0.0, 0.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        PatchMap((1, 1), bezier_knots(1), bad, ctrl, np.ones((2, 2)))


def test_degenerate_patch_rejected():
    ctrl = np.zeros((2, 2, 3))  # collapses to a point
    with pytest.raises(ValueError):
        PatchMap((1, 1), bezier_knots(1), bezier_knots(1), ctrl, np.ones((2, 2)))


def test_basis_partition_of_unity():
    knots = np.concatenate([[0, 0, 0, 0], [0.3, 0.7], [1, 1, 1, 1]])
    x = np.linspace(0, 1, 50)
    b = bspline_basis(knots, 3, x)
    np.testing.assert_allclose(b.sum(axis=1), 1.0, atol=1e-14)
    assert np.all(b >= -1e-14)


def test_tangents_match_finite_differences():
    patch = quarter_cylinder_patch()
    s, t, h = 0.37, 0.62, 1e-6
    ts, tt = patch.tangents(s, t)
    fd_s = (patch.eval(s + h, t) - patch.eval(s - h, t)) / (2 * h)
    fd_t = (patch.eval(s, t + h) - patch.eval(s, t - h)) / (2 * h)
    np.testing.assert_allclose(ts, fd_s, rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(tt, fd_t, rtol=1e-5, atol=1e-8)

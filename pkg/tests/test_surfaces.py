import numpy as np
import pytest

from scatteruq.chebyshev import chebyshev_grid
from scatteruq.nurbs import PatchMap, bezier_knots
from scatteruq.surfaces import (
    MultiPatchSurface,
    build_landmarks,
    builtin_surface,
    patch_quadrature,
    reference_surface,
    surface_area,
    surface_from_global,
    surface_from_nodal,
    surface_jacobian_normal,
)


def flat_patch(width=1.0):
    ctrl = np.array([[[0.0, 0, 0], [0, width, 0]], [[width, 0, 0], [width, width, 0]]])
    return PatchMap((1, 1), bezier_knots(1), bezier_knots(1), ctrl, np.ones((2, 2)))


def flat_surface(width=1.0):
    return MultiPatchSurface([flat_patch(width)], [], np.array([1.0]))


# -- built-ins ---------------------------------------------------------------

def test_torus_structure(torus):
    assert torus.n_patches == 16
    assert len(torus.adjacency) == 32  # closed 4x4 patch grid
    pt = torus.patches[0].eval(0.0, 0.0)
    np.testing.assert_allclose(pt, [1.0, 0.0, 0.0], atol=1e-14)  # outer equator


def test_torus_bounding_box(torus):
    grids = torus.patch_grids(np.linspace(0, 1, 9))
    flat = grids.reshape(-1, 3)
    assert np.abs(flat[:, :2]).max() == pytest.approx(1.0, abs=1e-12)
    assert np.abs(flat[:, 2]).max() == pytest.approx(0.25, abs=1e-12)


def test_torus_invalid_radii():
    with pytest.raises(ValueError):
        builtin_surface("torus", major_radius=0.2, minor_radius=0.5)


def test_cuboid_structure(cuboid):
    assert cuboid.n_patches == 24
    grids = cuboid.patch_grids(np.linspace(0, 1, 5))
    assert np.abs(grids.reshape(-1, 3)).max() == pytest.approx(2.0)


def test_unknown_builtin_rejected():
    with pytest.raises(ValueError):
        builtin_surface("klein-bottle")


def test_sphere_has_six_conforming_patches(sphere):
    assert sphere.n_patches == 6
    assert len(sphere.adjacency) == 12
    grids = sphere.patch_grids(np.linspace(0, 1, 12))
    radii = np.linalg.norm(grids.reshape(-1, 3), axis=1)
    np.testing.assert_allclose(radii, 1.0, atol=1e-11)


# -- landmarks ---------------------------------------------------------------

def test_torus_landmark_counts(torus):
    lm = build_landmarks(torus, 20)
    assert lm.global_index.shape == (16, 21, 21)  # 441 nodes per patch
    assert 16 * 21 * 21 == 7056
    assert lm.n == 16 * 400  # closed structured grid dedups to M*q^2


def test_cuboid_q1_landmarks_against_brute_force(cuboid):
    lm = build_landmarks(cuboid, 1)
    assert lm.n == 26
    # brute-force all-pairs clustering oracle
    pts = cuboid.patch_grids(chebyshev_grid(1).nodes).reshape(-1, 3)
    groups = []
    used = np.zeros(len(pts), dtype=bool)
    for i in range(len(pts)):
        if used[i]:
            continue
        close = np.linalg.norm(pts - pts[i], axis=1) < 1e-9
        used |= close
        groups.append(close)
    assert len(groups) == lm.n


def test_single_flat_patch_no_merges():
    lm = build_landmarks(flat_surface(), 2)
    assert lm.n == 9
    assert lm.global_index.shape == (1, 3, 3)


def test_landmark_dedup_idempotent(torus):
    lm = build_landmarks(torus, 6)
    surf = reference_surface(lm)
    lm2 = build_landmarks(surf, 6)
    np.testing.assert_array_equal(lm.global_index, lm2.global_index)
    np.testing.assert_allclose(lm.points, lm2.points, atol=1e-13)


# -- interpolated surfaces ---------------------------------------------------

def test_flat_patch_reproduced_everywhere():
    lm = build_landmarks(flat_surface(), 4)
    surf = surface_from_nodal(lm, lm.patch_values(lm.points))
    for s, t in [(0.1, 0.9), (0.5, 0.5), (0.33, 0.77)]:
        np.testing.assert_allclose(surf.eval(0, s, t), [s, t, 0.0], atol=1e-12)


def test_evaluation_at_nodes_is_exact(torus):
    lm = build_landmarks(torus, 5)
    surf = reference_surface(lm)
    nodes = surf.grid.nodes
    vals = surf.eval_grid(3, nodes, nodes)
    np.testing.assert_array_equal(vals, surf.nodal[3])


def test_reinterpolation_of_own_samples(torus):
    # evaluating and re-interpolating reproduces the polynomial surface
    lm = build_landmarks(torus, 8)
    surf = reference_surface(lm)
    s = np.linspace(0, 1, 23)
    direct = surf.eval_grid(5, s, s)
    resampled = reference_surface(build_landmarks(surf, 8)).eval_grid(5, s, s)
    np.testing.assert_allclose(resampled, direct, atol=1e-12)


def test_sphere_reinterpolation_error_decays_geometrically(sphere):
    dense = np.linspace(0, 1, 50)
    exact = sphere.patches[0].eval_grid(dense, dense)
    errs = []
    for q in (4, 6, 8, 10):
        surf = reference_surface(build_landmarks(sphere, q))
        approx = surf.eval_grid(0, dense, dense)
        errs.append(np.linalg.norm(approx - exact, axis=2).max())
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    assert all(r > 3.0 for r in ratios), (errs, ratios)


def test_mismatched_shared_edge_values_rejected(torus):
    lm = build_landmarks(torus, 3)
    nodal = lm.patch_values(lm.points)
    shared = lm.global_index[0, -1, 1]
    assert (lm.global_index == shared).sum() > 1
    loc = np.argwhere(lm.global_index == shared)[0]
    nodal[loc[0], loc[1], loc[2], 2] += 1e-3
    with pytest.raises(ValueError):
        surface_from_nodal(lm, nodal)


def test_zero_deformation_matches_reference(torus_q10_landmarks):
    lm = torus_q10_landmarks
    a = reference_surface(lm)
    b = surface_from_global(lm, lm.points)
    np.testing.assert_array_equal(a.nodal, b.nodal)


# -- jacobians and normals ---------------------------------------------------

def test_sphere_normal_equals_radial_at_q20(sphere):
    surf = reference_surface(build_landmarks(sphere, 20))
    worst = 0.0
    for patch in range(6):
        for s in (0.08, 0.5, 0.91):
            for t in (0.13, 0.47, 0.88):
                _, _, n, _ = surface_jacobian_normal(surf, patch, s, t)
                x = surf.eval(patch, s, t)
                worst = max(worst, np.linalg.norm(n - x / np.linalg.norm(x)))
    assert worst <= 1e-8


def test_flat_patch_normal_and_area():
    lm = build_landmarks(flat_surface(2.0), 3)
    surf = reference_surface(lm)
    ts, tt, n, area = surface_jacobian_normal(surf, 0, 0.3, 0.6)
    np.testing.assert_allclose(np.abs(n), [0, 0, 1], atol=1e-13)
    assert area == pytest.approx(4.0, abs=1e-12)  # 2x2 patch area scale


def test_tangents_match_finite_differences(torus):
    surf = reference_surface(build_landmarks(torus, 10))
    s, t, h = 0.42, 0.58, 1e-6
    ts, tt, _, _ = surface_jacobian_normal(surf, 7, s, t)
    fd_s = (surf.eval(7, s + h, t) - surf.eval(7, s - h, t)) / (2 * h)
    fd_t = (surf.eval(7, s, t + h) - surf.eval(7, s, t - h)) / (2 * h)
    np.testing.assert_allclose(ts, fd_s, rtol=1e-5)
    np.testing.assert_allclose(tt, fd_t, rtol=1e-5)


def test_normals_point_outward_on_convex_builtins(sphere, cuboid):
    for surface, anchor in ((sphere, np.zeros(3)), (cuboid, np.zeros(3))):
        surf = reference_surface(build_landmarks(surface, 4))
        for patch in range(surf.n_patches):
            _, pts, _ = patch_quadrature(surf, patch, 3)
            for s, t in [(0.25, 0.25), (0.7, 0.4)]:
                _, _, n, _ = surface_jacobian_normal(surf, patch, s, t)
                x = surf.eval(patch, s, t)
                assert np.dot(n, x - anchor) > 0


def test_parameters_outside_square_rejected(torus):
    surf = reference_surface(build_landmarks(torus, 4))
    with pytest.raises(ValueError):
        surface_jacobian_normal(surf, 0, 1.2, 0.5)


# -- quadrature ----------------------------------------------------------------

def test_sphere_area(sphere):
    surf = reference_surface(build_landmarks(sphere, 20))
    assert abs(surface_area(surf, 12) - 4 * np.pi) <= 1e-8


def test_torus_area(torus):
    surf = reference_surface(build_landmarks(torus, 20))
    exact = 4 * np.pi**2 * 0.75 * 0.25
    assert abs(surface_area(surf, 12) - exact) <= 1e-8


def test_constant_on_flat_patch():
    surf = reference_surface(build_landmarks(flat_surface(), 2))
    _, _, w = patch_quadrature(surf, 0, 4)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)


def test_gauss_rule_polynomial_exactness(rng):
    # order-(p+2) tensor Gauss integrates per-variable degree 2(p+2)-1 exactly
    surf = reference_surface(build_landmarks(flat_surface(), 2))
    for p in (0, 1, 2):
        order = p + 2
        params, _, w = patch_quadrature(surf, 0, order)
        deg = 2 * order - 1
        cu = rng.standard_normal(deg + 1)
        cv = rng.standard_normal(deg + 1)
        pu = np.polynomial.Polynomial(cu)
        pv = np.polynomial.Polynomial(cv)
        approx = (pu(params[:, 0]) * pv(params[:, 1]) * w).sum()
        exact = pu.integ()(1.0) * pv.integ()(1.0)
        assert abs(approx - exact) <= 1e-12 * max(1.0, abs(exact))

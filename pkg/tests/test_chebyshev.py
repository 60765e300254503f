import numpy as np
import pytest

from scatteruq.chebyshev import (
    bary_eval_1d,
    chebyshev_grid,
    chebyshev_nodes_first_kind,
    diff_matrix,
    interp_matrix,
)


def test_grid_q2_nodes_and_weights():
    grid = chebyshev_grid(2)
    np.testing.assert_allclose(grid.nodes, [0.0, 0.5, 1.0], atol=0)
    assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 1.0
    np.testing.assert_array_equal(grid.weights, [0.5, -1.0, 0.5])


def test_grid_q1_endpoint_case():
    grid = chebyshev_grid(1)
    np.testing.assert_array_equal(grid.nodes, [0.0, 1.0])
    np.testing.assert_array_equal(grid.weights, [0.5, -0.5])


def test_grid_nodes_increasing():
    for q in (2, 5, 20, 33):
        nodes = chebyshev_grid(q).nodes
        assert np.all(np.diff(nodes) > 0)


def test_degenerate_grid_rejected():
    with pytest.raises(ValueError):
        chebyshev_grid(0)


def test_quadratic_reproduced_exactly():
    grid = chebyshev_grid(2)
    vals = grid.nodes**2
    assert bary_eval_1d(grid, vals, 0.25) == pytest.approx(0.0625, abs=1e-15)


def test_node_hit_returns_nodal_value():
    grid = chebyshev_grid(2)
    vals = np.array([3.0, -7.0, 11.0])
    assert bary_eval_1d(grid, vals, 0.5) == -7.0
    assert bary_eval_1d(grid, vals, 0.5 + 1e-15) == -7.0


def test_exp_interpolation_q20():
    grid = chebyshev_grid(20)
    vals = np.exp(grid.nodes)
    s = np.linspace(0, 1, 1000)
    interp = interp_matrix(grid.nodes, grid.weights, s) @ vals
    assert np.abs(interp - np.exp(s)).max() <= 1e-12


def test_nonfinite_values_rejected():
    grid = chebyshev_grid(2)
    with pytest.raises(ValueError):
        bary_eval_1d(grid, [1.0, np.nan, 0.0], 0.3)


def test_polynomial_exactness_random_degrees(rng):
    # interpolation of any degree <= q polynomial is exact to 1e-12
    for q in (2, 8, 20):
        grid = chebyshev_grid(q)
        coef = rng.standard_normal(q + 1)
        poly = np.polynomial.Polynomial(coef)
        s = rng.uniform(0, 1, 200)
        interp = interp_matrix(grid.nodes, grid.weights, s) @ poly(grid.nodes)
        assert np.abs(interp - poly(s)).max() <= 1e-12


def test_affine_invariance_of_weights(rng):
    # mapping nodes affinely leaves the barycentric weights usable as-is
    grid = chebyshev_grid(7)
    a, b = -2.0, 5.0
    mapped = a + (b - a) * grid.nodes
    f = lambda x: np.sin(x) + x**3
    s = rng.uniform(0, 1, 50)
    direct = interp_matrix(mapped, grid.weights, a + (b - a) * s) @ f(mapped)
    via_unit = interp_matrix(grid.nodes, grid.weights, s) @ f(mapped)
    np.testing.assert_allclose(direct, via_unit, atol=1e-13)


def test_diff_matrix_differentiates_polynomials():
    grid = chebyshev_grid(9)
    d = diff_matrix(grid.nodes, grid.weights)
    vals = grid.nodes**5
    np.testing.assert_allclose(d @ vals, 5 * grid.nodes**4, atol=1e-10)


def test_first_kind_nodes_interior():
    nodes, weights = chebyshev_nodes_first_kind(1)
    assert nodes[0] == pytest.approx(0.5)
    nodes, weights = chebyshev_nodes_first_kind(6)
    assert np.all((nodes > 0) & (nodes < 1))
    # interpolation at first-kind nodes reproduces polynomials too
    vals = nodes**5 - 2 * nodes**2
    s = np.linspace(0, 1, 100)
    interp = interp_matrix(nodes, weights, s) @ vals
    np.testing.assert_allclose(interp, s**5 - 2 * s**2, atol=1e-13)

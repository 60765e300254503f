import numpy as np
import pytest

from scatteruq.randfield import (
    CovarianceModel,
    KLBasis,
    LandmarkCovariance,
    MaternKernel,
    NotPositiveSemidefiniteError,
    covariance_entry,
    default_covariance_model,
    deformed_surface,
    draw_parameters,
    kl_from_cholesky,
    kl_sample,
    load_kl_basis,
    matern_eval,
    pivoted_cholesky,
    rng_stream,
    save_kl_basis,
    singular_value_decay,
)
from scatteruq.surfaces import build_landmarks, builtin_surface


def dense_pivoted(mat, tol, **kw):
    mat = np.asarray(mat, dtype=float)
    return pivoted_cholesky(
        None, len(mat), tol, column=lambda j: mat[:, j], diagonal=lambda: np.diag(mat).copy(), **kw
    )


def random_spd(rng, n, spread=3.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.exp(rng.uniform(-spread, spread, n))
    return (q * lam) @ q.T


# -- Matern kernels -----------------------------------------------------------

def test_matern_half_closed_form():
    k = MaternKernel(0.5, 1.0)
    assert matern_eval(k, 1.0) == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_matern_three_half_closed_form():
    k = MaternKernel(1.5, 1.0)
    expected = (1 + np.sqrt(3)) * np.exp(-np.sqrt(3))
    assert matern_eval(k, 1.0) == pytest.approx(expected, rel=1e-14)
    assert matern_eval(k, 1.0) == pytest.approx(0.48349, abs=5e-6)


def test_matern_zero_distance_is_one():
    for nu in (0.5, 1.5, 2.5, 3.7, np.inf):
        assert matern_eval(MaternKernel(nu, 0.8), 0.0) == 1.0


def test_matern_monotone_decreasing_bounded():
    r = np.linspace(0, 5, 200)
    for nu in (0.5, 1.5, 2.5, 1.1, np.inf):
        vals = matern_eval(MaternKernel(nu, 1.0), r)
        assert np.all(np.diff(vals) <= 1e-12)
        assert np.all((vals > 0) & (vals <= 1.0))


def test_general_nu_matches_half_integer_formulas():
    # the Bessel branch evaluated at half-integer nu agrees with closed forms
    r = np.array([0.2, 1.0, 2.5])
    gen = matern_eval(MaternKernel(1.5000000001, 1.0), r)
    closed = matern_eval(MaternKernel(1.5, 1.0), r)
    np.testing.assert_allclose(gen, closed, rtol=1e-7)


def test_negative_distance_rejected():
    with pytest.raises(ValueError):
        matern_eval(MaternKernel(1.5, 1.0), -0.1)


# -- covariance model ----------------------------------------------------------

def test_default_model_at_zero_distance():
    model = default_covariance_model()
    block = covariance_entry(model, [0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
    np.testing.assert_allclose(np.diag(block), 1.0)
    off = block[~np.eye(3, dtype=bool)]
    np.testing.assert_allclose(off, 1e-4)


def test_default_model_diagonal_at_005():
    model = default_covariance_model()
    block = covariance_entry(model, [0.0, 0, 0], [0.05, 0, 0])
    expected = (1 + np.sqrt(3)) * np.exp(-np.sqrt(3))  # matern-3/2 at 20 * 0.05
    np.testing.assert_allclose(np.diag(block), expected, rtol=1e-12)


def test_model_symmetric_under_argument_swap(rng):
    model = default_covariance_model()
    x, y = rng.normal(size=3), rng.normal(size=3)
    np.testing.assert_array_equal(covariance_entry(model, x, y), covariance_entry(model, y, x).T)


def test_model_shape_validation():
    with pytest.raises(ValueError):
        CovarianceModel(np.ones((2, 2)), np.ones((3, 3)), np.ones((3, 3)))


# -- pivoted Cholesky ----------------------------------------------------------

def test_identity_full_rank():
    res = dense_pivoted(np.eye(3), 1e-12)
    assert res.rank == 3
    assert res.residual_trace[-1] <= 1e-14
    np.testing.assert_allclose(res.factor @ res.factor.T, np.eye(3), atol=1e-14)


def test_rank_one_outer_product():
    v = np.array([1.0, 2.0, 2.0])
    res = dense_pivoted(np.outer(v, v), 1e-12)
    assert res.rank == 1
    assert res.pivots[0] in (1, 2)  # largest diagonal entries are 4
    np.testing.assert_allclose(res.factor @ res.factor.T, np.outer(v, v), atol=1e-12)


def test_random_spd_against_eigendecomposition(rng):
    mat = random_spd(rng, 30)
    res = dense_pivoted(mat, 1e-8)
    assert res.residual_trace[-1] <= 1e-8 * np.trace(mat)
    lam = np.linalg.eigvalsh(mat)
    recon = np.linalg.eigvalsh(res.factor @ res.factor.T)
    assert np.abs(lam - recon).max() <= 1e-7 * lam.max()


def test_residual_trace_strictly_decreasing(rng):
    mat = random_spd(rng, 25)
    res = dense_pivoted(mat, 1e-10)
    assert np.all(np.diff(res.residual_trace) < 0)


def test_pivot_row_reconstruction(rng):
    # retained pivot rows of L L^T match the matrix exactly
    mat = random_spd(rng, 40)
    res = dense_pivoted(mat, 1e-4)
    recon = res.factor @ res.factor.T
    for piv in res.pivots:
        np.testing.assert_allclose(recon[piv], mat[piv], atol=1e-10 * np.abs(mat).max())


def test_not_psd_detected():
    mat = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
    with pytest.raises(NotPositiveSemidefiniteError):
        dense_pivoted(mat, 1e-12)


def test_rank_exhaustion_reported(rng):
    mat = random_spd(rng, 12)
    with pytest.raises(RuntimeError):
        dense_pivoted(mat, 1e-12, max_rank=3)


# -- KL basis -------------------------------------------------------------------

def test_kl_from_diagonal_matrix():
    res = dense_pivoted(np.diag([4.0, 1.0]), 1e-14)
    basis = kl_from_cholesky(res)
    np.testing.assert_allclose(basis.eigenvalues, [4.0, 1.0], atol=1e-13)
    np.testing.assert_allclose(np.linalg.norm(basis.modes, axis=0), [2.0, 1.0], atol=1e-13)


def test_kl_rank_one():
    v = np.array([1.0, 2.0, 2.0])
    basis = kl_from_cholesky(dense_pivoted(np.outer(v, v), 1e-12))
    assert basis.m == 1
    assert basis.eigenvalues[0] == pytest.approx(9.0, abs=1e-12)
    direction = basis.modes[:, 0] / np.linalg.norm(basis.modes[:, 0])
    np.testing.assert_allclose(np.abs(direction), v / 3.0, atol=1e-12)


def test_trace_identity_random_spd(rng):
    mat = random_spd(rng, 35)
    res = dense_pivoted(mat, 1e-12)
    basis = kl_from_cholesky(res)
    trace_llt = np.trace(res.factor @ res.factor.T)
    assert basis.eigenvalues.sum() == pytest.approx(trace_llt, rel=1e-10)


def test_eigenpair_transfer(rng):
    mat = random_spd(rng, 30, spread=2.0)
    res = dense_pivoted(mat, 1e-10)
    basis = kl_from_cholesky(res)
    llt = res.factor @ res.factor.T
    for k in range(basis.m):
        mode = basis.modes[:, k]
        resid = llt @ mode - basis.eigenvalues[k] * mode
        assert np.linalg.norm(resid) <= 1e-8 * basis.eigenvalues[0] * np.linalg.norm(mode)


def test_modes_mutually_orthogonal(rng):
    mat = random_spd(rng, 20, spread=1.5)
    basis = kl_from_cholesky(dense_pivoted(mat, 1e-12))
    gram = basis.modes.T @ basis.modes
    off = gram - np.diag(np.diag(gram))
    assert np.abs(off).max() <= 1e-8 * basis.eigenvalues[0]


# -- sampling -------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_torus_kl():
    torus = builtin_surface("torus")
    lm = build_landmarks(torus, 4)
    cov = LandmarkCovariance(default_covariance_model(), lm.points)
    chol = pivoted_cholesky(None, cov.dim, 1e-4, column=cov.column, diagonal=cov.diagonal)
    return lm, kl_from_cholesky(chol)


def test_zero_parameters_identity(small_torus_kl):
    lm, basis = small_torus_kl
    sample = kl_sample(basis, lm, 0.07, np.zeros(basis.m))
    np.testing.assert_array_equal(sample.displaced, lm.points.T)


def test_zero_magnitude_identity(small_torus_kl, rng):
    lm, basis = small_torus_kl
    y = rng.uniform(-1, 1, basis.m)
    sample = kl_sample(basis, lm, 0.0, y)
    np.testing.assert_array_equal(sample.displaced, lm.points.T)


def test_displacement_triangle_inequality_bound(small_torus_kl, rng):
    lm, basis = small_torus_kl
    alpha = 0.07
    y = rng.uniform(-1, 1, basis.m)
    sample = kl_sample(basis, lm, alpha, y)
    disp = np.abs(sample.displaced - lm.points.T).max()
    bound = alpha * np.abs(basis.modes).sum(axis=1).max()
    assert disp <= bound + 1e-12


def test_sampling_linearity(small_torus_kl, rng):
    lm, basis = small_torus_kl
    y1 = rng.uniform(-0.5, 0.5, basis.m)
    y2 = rng.uniform(-0.5, 0.5, basis.m)
    d1 = kl_sample(basis, lm, 0.07, y1).displaced - lm.points.T
    d2 = kl_sample(basis, lm, 0.07, y2).displaced - lm.points.T
    d12 = kl_sample(basis, lm, 0.07, y1 + y2).displaced - lm.points.T
    np.testing.assert_allclose(d12, d1 + d2, atol=1e-12)


def test_dimension_mismatch_rejected(small_torus_kl):
    lm, basis = small_torus_kl
    with pytest.raises(ValueError):
        kl_sample(basis, lm, 0.07, np.zeros(basis.m + 1))


def test_deformed_surface_conforms_on_shared_edges(small_torus_kl, rng):
    lm, basis = small_torus_kl
    surf = deformed_surface(basis, lm, 0.07, rng.uniform(-1, 1, basis.m))
    # patch 0 edge s=1 coincides with patch 4 edge s=0 on the torus
    t = np.linspace(0, 1, 9)
    a = surf.eval_grid(0, np.array([1.0]), t)[0]
    b = surf.eval_grid(4, np.array([0.0]), t)[0]
    np.testing.assert_allclose(a, b, atol=1e-12)


# -- parameter streams -----------------------------------------------------------

def test_streams_deterministic():
    a = draw_parameters(rng_stream(123, 2, 17), 50)
    b = draw_parameters(rng_stream(123, 2, 17), 50)
    np.testing.assert_array_equal(a, b)
    c = draw_parameters(rng_stream(123, 2, 18), 50)
    assert not np.array_equal(a, c)


def test_uniform_moments():
    n, m = 10**5, 4
    draws = np.stack([draw_parameters(rng_stream(7, 0, i), m) for i in range(200)])
    # 200 streams x 4 coords is small; use one long stream for the moment check
    big = rng_stream(11, 0, 0).uniform(-1, 1, (n, m))
    mean = big.mean(axis=0)
    var = big.var(axis=0)
    assert np.all(np.abs(mean) < 0.02)
    np.testing.assert_allclose(var, 1 / 3, rtol=0.05)
    assert np.all(draws >= -1) and np.all(draws <= 1)


# -- spectrum decay ----------------------------------------------------------------

def test_exact_power_law_slope():
    lam = np.arange(1, 201) ** -1.25
    basis = KLBasis(lam, np.zeros((10, 200)))
    assert singular_value_decay(basis) == pytest.approx(-1.25, abs=1e-6)


def test_exponential_decay_steep_slope():
    lam = np.exp(-np.arange(1, 101, dtype=float))
    basis = KLBasis(lam, np.zeros((10, 100)))
    assert singular_value_decay(basis) < -3


def test_minimum_modes_required():
    basis = KLBasis(np.ones(10), np.zeros((5, 10)))
    with pytest.raises(ValueError):
        singular_value_decay(basis)


# -- persistence ---------------------------------------------------------------------

def test_kl_roundtrip(tmp_path, small_torus_kl):
    lm, basis = small_torus_kl
    path = tmp_path / "basis.npz"
    save_kl_basis(path, basis, lm.n)
    loaded, n = load_kl_basis(path)
    assert n == lm.n
    np.testing.assert_array_equal(loaded.eigenvalues, basis.eigenvalues)
    np.testing.assert_array_equal(loaded.modes, basis.modes)

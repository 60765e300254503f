"""Matérn covariances, pivoted-Cholesky low-rank factorization, and
Karhunen-Loève sampling of surface deformation fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from .surfaces import LandmarkSet, surface_from_global

PSD_PIVOT_SLACK = -1e-10
PIVOT_EXHAUSTION = 1e-14


class NotPositiveSemidefiniteError(RuntimeError):
    """Raised when pivoted Cholesky meets a pivot below the PSD slack."""


@dataclass(frozen=True)
class MaternKernel:
    """Matérn correlation of smoothness ``nu`` and length ``length``.

    ``nu = inf`` is the Gaussian kernel exp(-r^2 / (2 l^2)).  Half-integer
    orders use the closed forms; other finite orders go through the modified
    Bessel function K_nu.
    """

    nu: float = 1.5
    length: float = 1.0

    def __post_init__(self):
        if not (self.nu > 0):
            raise ValueError("smoothness must be positive")
        if not (self.length > 0):
            raise ValueError("correlation length must be positive")

    def __call__(self, r):
        return matern_eval(self, r)


def matern_eval(kernel: MaternKernel, r):
    """Evaluate the kernel at nonnegative distances; k(0) = 1."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be nonnegative")
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    nu, length = kernel.nu, kernel.length
    if np.isinf(nu):
        out = np.exp(-(r**2) / (2.0 * length**2))
    else:
        z = np.sqrt(2.0 * nu) * r / length
        if nu == 0.5:
            out = np.exp(-z)
        elif nu == 1.5:
            out = (1.0 + z) * np.exp(-z)
        elif nu == 2.5:
            out = (1.0 + z + z**2 / 3.0) * np.exp(-z)
        else:
            out = np.ones_like(r)
            pos = z > 0
            zp = z[pos]
            out[pos] = 2.0 ** (1.0 - nu) / gamma_fn(nu) * zp**nu * kv(nu, zp)
        out = np.where(r == 0.0, 1.0, out)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class CovarianceModel:
    """Matrix-valued covariance: entry (a, b) is amp * k_nu(scale * r).

    ``amplitude``, ``smoothness`` and ``scale`` are 3x3 arrays; radial
    dependence makes the model symmetric in its two point arguments.
    """

    amplitude: np.ndarray = field(repr=False)
    smoothness: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("amplitude", "smoothness", "scale"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3, 3):
                raise ValueError(f"{name} must be a 3x3 array")
            object.__setattr__(self, name, arr)

    def entry(self, a: int, b: int, r):
        kern = MaternKernel(self.smoothness[a, b], 1.0)
        return self.amplitude[a, b] * matern_eval(kern, self.scale[a, b] * np.asarray(r))


def default_covariance_model() -> CovarianceModel:
    """Matérn-3/2 diagonal at distance scale 20 with weak Gaussian coupling."""
    amplitude = np.full((3, 3), 1e-4)
    np.fill_diagonal(amplitude, 1.0)
    smoothness = np.full((3, 3), np.inf)
    np.fill_diagonal(smoothness, 1.5)
    scale = np.full((3, 3), 4.0)
    np.fill_diagonal(scale, 20.0)
    return CovarianceModel(amplitude, smoothness, scale)


def covariance_entry(model: CovarianceModel, x, x_prime) -> np.ndarray:
    """3x3 covariance block for one point pair."""
    r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(x_prime, float)))
    out = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            out[a, b] = model.entry(a, b, r)
    return out


class LandmarkCovariance:
    """Covariance matrix over landmark points, blocked by component.

    Row/column index a*n + i refers to component ``a`` at global point ``i``;
    columns are assembled on demand so the full matrix is never stored.
    """

    def __init__(self, model: CovarianceModel, points: np.ndarray):
        self.model = model
        self.points = np.asarray(points, dtype=float)
        self.n = len(self.points)
        self.dim = 3 * self.n

    def column(self, j: int) -> np.ndarray:
        b, jj = divmod(j, self.n)
        r = np.linalg.norm(self.points - self.points[jj], axis=1)
        col = np.empty(self.dim)
        for a in range(3):
            col[a * self.n : (a + 1) * self.n] = self.model.entry(a, b, r)
        return col

    def diagonal(self) -> np.ndarray:
        diag = np.empty(self.dim)
        for a in range(3):
            diag[a * self.n : (a + 1) * self.n] = self.model.entry(a, a, 0.0)
        return diag

    def __call__(self, i, j):
        """Entry oracle; ``i`` may be an index array."""
        return self.column(int(j))[i]


@dataclass(frozen=True)
class PivotedCholeskyResult:
    factor: np.ndarray = field(repr=False)  # (dim, m)
    pivots: np.ndarray = field(repr=False)
    residual_trace: np.ndarray = field(repr=False)  # after each step
    tolerance: float = 0.0

    @property
    def rank(self) -> int:
        return self.factor.shape[1]


def pivoted_cholesky(entry, dim: int, tol: float, column=None, diagonal=None,
                     max_rank: int | None = None) -> PivotedCholeskyResult:
    """Greedy low-rank Cholesky with diagonal pivoting.

    ``entry(i, j)`` must broadcast over an index array ``i``; passing
    ``column``/``diagonal`` callables skips the oracle adapter.  Columns of
    the target matrix are fetched on demand, one per accepted pivot.  Stops
    when the residual trace drops below ``tol`` times the initial trace, or
    when the best remaining pivot falls under 1e-14 of the initial maximum.
    """
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    idx = np.arange(dim)
    if column is None:
        column = lambda j: np.asarray(entry(idx, j), dtype=float).reshape(dim)
    if diagonal is None:
        diagonal = lambda: np.array(
            [np.asarray(entry(np.array([i]), i), dtype=float).ravel()[0] for i in range(dim)]
        )
    diag = np.asarray(diagonal(), dtype=float).copy()
    trace0 = diag.sum()
    max_diag0 = diag.max()
    if trace0 <= 0:
        raise ValueError("matrix has vanishing diagonal, nothing to factor")
    if max_rank is None:
        max_rank = dim
    factor = np.empty((dim, min(max_rank, dim)), order="F")
    pivots = []
    residuals = []
    trace = trace0
    k = 0
    while trace > tol * trace0 and k < factor.shape[1]:
        piv = int(np.argmax(diag))
        pval = diag[piv]
        if pval < PSD_PIVOT_SLACK * max(max_diag0, 1.0):
            raise NotPositiveSemidefiniteError(
                f"matrix not PSD: pivot {pval:.3e} at step {k}"
            )
        if pval < PIVOT_EXHAUSTION * max_diag0:
            break
        col = column(piv).astype(float, copy=True)
        if k:
            col -= factor[:, :k] @ factor[piv, :k]
        root = math.sqrt(pval)
        col /= root
        col[piv] = root
        factor[:, k] = col
        pivots.append(piv)
        diag -= col**2
        diag[piv] = 0.0
        trace = float(diag.sum())
        residuals.append(max(trace, 0.0))
        k += 1
    if k == 0:
        raise ValueError("no pivot accepted; matrix numerically zero")
    res = PivotedCholeskyResult(factor[:, :k].copy(), np.array(pivots), np.array(residuals), tol)
    if res.residual_trace[-1] > tol * trace0 and res.rank >= max_rank:
        raise RuntimeError(
            f"rank exhausted at {res.rank} with residual {res.residual_trace[-1]:.3e}"
        )
    return res


@dataclass(frozen=True)
class KLBasis:
    """Eigenvalues and scaled modes of the factored covariance.

    Column k of ``modes`` is L @ v_k and has Euclidean norm sqrt(lambda_k).
    """

    eigenvalues: np.ndarray = field(repr=False)
    modes: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.eigenvalues)


def kl_from_cholesky(chol: PivotedCholeskyResult) -> KLBasis:
    """Eigen post-processing: eigenpairs of L^T L transfer to L L^T."""
    small = chol.factor.T @ chol.factor
    lam, vecs = np.linalg.eigh(small)
    order = np.argsort(lam)[::-1]
    lam, vecs = lam[order], vecs[:, order]
    keep = lam > 1e-14 * lam[0]
    lam, vecs = lam[keep], vecs[:, keep]
    return KLBasis(lam, chol.factor @ vecs)


@dataclass(frozen=True)
class DeformationSample:
    parameters: np.ndarray = field(repr=False)
    magnitude: float
    displaced: np.ndarray = field(repr=False)  # (3, n)


def kl_sample(basis: KLBasis, landmarks: LandmarkSet, alpha: float, y) -> DeformationSample:
    """Displace landmark points by the truncated expansion at parameters ``y``.

    The length-3n mode vector is component-major (x-block, y-block, z-block),
    matching the blocked covariance assembly.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (basis.m,):
        raise ValueError(f"expected {basis.m} parameters, got shape {y.shape}")
    if np.any(np.abs(y) > 1.0 + 1e-12):
        raise ValueError("parameters must lie in [-1, 1]")
    disp = (basis.modes @ y).reshape(3, landmarks.n)
    displaced = landmarks.points.T + alpha * disp
    return DeformationSample(y, alpha, displaced)


def deformed_surface(basis: KLBasis, landmarks: LandmarkSet, alpha: float, y):
    """Convenience: sample a deformation and re-interpolate the surface."""
    sample = kl_sample(basis, landmarks, alpha, y)
    return surface_from_global(landmarks, sample.displaced.T)


def rng_stream(base_seed: int, level: int, index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, level, sample index)."""
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(level), int(index)))
    return np.random.Generator(np.random.Philox(seq))


def draw_parameters(stream: np.random.Generator, m: int) -> np.ndarray:
    """m independent U(-1, 1) coordinates from the given stream."""
    return stream.uniform(-1.0, 1.0, size=m)


def singular_value_decay(basis: KLBasis) -> float:
    """Log-log slope of the eigenvalue tail k in [m/4, m]."""
    if basis.m < 20:
        raise ValueError("need at least 20 modes for a tail fit")
    k = np.arange(1, basis.m + 1)
    tail = k >= basis.m / 4
    x = np.log(k[tail])
    ydata = np.log(basis.eigenvalues[tail])
    slope, _ = np.polyfit(x, ydata, 1)
    return float(slope)


KL_FORMAT_VERSION = 1


def save_kl_basis(path: str, basis: KLBasis, n_points: int) -> None:
    """Cache an expensive decomposition between runs."""
    np.savez(
        path,
        version=KL_FORMAT_VERSION,
        n=n_points,
        m=basis.m,
        eigenvalues=basis.eigenvalues,
        modes=basis.modes,
    )


def load_kl_basis(path: str) -> tuple[KLBasis, int]:
    data = np.load(path)
    if int(data["version"]) != KL_FORMAT_VERSION:
        raise ValueError(f"unsupported KL cache version {int(data['version'])}")
    return KLBasis(data["eigenvalues"], data["modes"]), int(data["n"])

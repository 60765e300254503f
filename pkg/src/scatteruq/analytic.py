"""Series solution for plane-wave scattering by a sound-soft sphere.

Used as the analytic reference for the boundary element solver.  The sign
conventions follow the solver: incident wave exp(-i*kappa*<d, x>) and
radiating fields built on the kernel exp(-i*kappa*r)/(4*pi*r), i.e. the
expansion uses spherical Hankel functions of the second kind.
"""

from __future__ import annotations

import numpy as np
from scipy.special import spherical_jn, spherical_yn


def _hankel2(n: int, z, derivative: bool = False):
    return spherical_jn(n, z, derivative) - 1j * spherical_yn(n, z, derivative)


def _legendre_all(nmax: int, x: np.ndarray):
    """P_n(x) and P_n'(x) for n = 0..nmax, shapes (nmax+1, len(x))."""
    x = np.asarray(x, dtype=float)
    p = np.empty((nmax + 1, len(x)))
    p[0] = 1.0
    if nmax >= 1:
        p[1] = x
    for n in range(1, nmax):
        p[n + 1] = ((2 * n + 1) * x * p[n] - n * p[n - 1]) / (n + 1)
    dp = np.empty_like(p)
    dp[0] = 0.0
    for n in range(1, nmax + 1):
        # (1 - x^2) P_n' = n (P_{n-1} - x P_n); safe since |x| < 1 off axis
        denom = 1.0 - x**2
        mask = denom > 1e-14
        dp[n, mask] = n * (p[n - 1, mask] - x[mask] * p[n, mask]) / denom[mask]
        dp[n, ~mask] = n * (n + 1) / 2.0 * np.sign(x[~mask]) ** (n + 1)
    return p, dp


def _n_terms(kappa: float, radius: float) -> int:
    return int(np.ceil(kappa * radius + 12 + 1.5 * (kappa * radius) ** (1 / 3)))


def mie_coefficients(kappa: float, radius: float, nmax: int) -> np.ndarray:
    """Scattering coefficients enforcing u = 0 on the sphere."""
    n = np.arange(nmax + 1)
    return -spherical_jn(n, kappa * radius) / _hankel2(n, kappa * radius)


def mie_scattered(kappa: float, direction, x, radius: float = 1.0) -> np.ndarray:
    """Scattered wave at exterior points (n_pts, 3) or a single point."""
    xp = np.atleast_2d(np.asarray(x, dtype=float))
    d = np.asarray(direction, dtype=float)
    r = np.linalg.norm(xp, axis=1)
    if np.any(r < radius - 1e-12):
        raise ValueError("evaluation point inside the sphere")
    cosg = (xp @ d) / r
    nmax = _n_terms(kappa, radius)
    c = mie_coefficients(kappa, radius, nmax)
    p, _ = _legendre_all(nmax, cosg)
    out = np.zeros(len(xp), dtype=complex)
    for n in range(nmax + 1):
        out += (2 * n + 1) * (-1j) ** n * c[n] * _hankel2(n, kappa * r) * p[n]
    return out[0] if np.asarray(x).ndim == 1 else out


def mie_scattered_gradient(kappa: float, direction, x, radius: float = 1.0) -> np.ndarray:
    """Gradient of the scattered wave at exterior points, shape (n, 3)."""
    xp = np.atleast_2d(np.asarray(x, dtype=float))
    d = np.asarray(direction, dtype=float)
    r = np.linalg.norm(xp, axis=1)
    xhat = xp / r[:, None]
    cosg = xhat @ d
    nmax = _n_terms(kappa, radius)
    c = mie_coefficients(kappa, radius, nmax)
    p, dp = _legendre_all(nmax, cosg)
    dcos = (d[None, :] - cosg[:, None] * xhat) / r[:, None]
    out = np.zeros((len(xp), 3), dtype=complex)
    for n in range(nmax + 1):
        amp = (2 * n + 1) * (-1j) ** n * c[n]
        radial = amp * kappa * _hankel2(n, kappa * r, derivative=True) * p[n]
        angular = amp * _hankel2(n, kappa * r) * dp[n]
        out += radial[:, None] * xhat + angular[:, None] * dcos
    return out[0] if np.asarray(x).ndim == 1 else out


def mie_neumann_trace(kappa: float, direction, points, radius: float = 1.0) -> np.ndarray:
    """Outward normal derivative of the total wave at sphere surface points.

    Uses the Wronskian identity, which reduces the radial bracket to
    i / ((kappa R)^2 h2_n(kappa R)).
    """
    xp = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.asarray(direction, dtype=float)
    r = np.linalg.norm(xp, axis=1)
    if np.any(np.abs(r - radius) > 1e-6 * radius):
        raise ValueError("points must lie on the sphere surface")
    cosg = (xp @ d) / r
    nmax = _n_terms(kappa, radius)
    z = kappa * radius
    p, _ = _legendre_all(nmax, cosg)
    out = np.zeros(len(xp), dtype=complex)
    for n in range(nmax + 1):
        out += (2 * n + 1) * (-1j) ** n * (1j / (z**2 * _hankel2(n, z))) * p[n]
    return kappa * out

"""Cauchy data on a fixed artificial interface and moment propagation.

Storing per-sample traces on an enclosing cuboid decouples the varying
per-realization discretizations from the statistics: first and second
moments of the Cauchy data determine the field statistics everywhere
outside the interface through the representation formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bem import eval_scattered_with_gradient
from .surfaces import build_landmarks, builtin_surface, gauss_rule_01, reference_surface

ENCLOSURE_MARGIN = 0.05


class EnclosureError(RuntimeError):
    """A realization reaches (or crosses) the artificial interface."""


@dataclass(frozen=True)
class ArtificialInterface:
    """Cuboid interface with a tensor Gauss grid per flat patch.

    The Gauss nodes double as degree-(g-1) interpolation points and as the
    quadrature rule for the representation formula.
    """

    half_width: float
    grid_size: int
    points: np.ndarray = field(repr=False)  # (n, 3)
    normals: np.ndarray = field(repr=False)  # (n, 3)
    weights: np.ndarray = field(repr=False)  # (n,) includes area elements
    patch_of: np.ndarray = field(repr=False)  # (n,)

    @property
    def n_points(self) -> int:
        return len(self.points)

    def check_enclosure(self, coords: np.ndarray) -> None:
        """Require all points (n, 3) strictly inside with the safety margin."""
        reach = float(np.abs(coords).max())
        if reach >= self.half_width - ENCLOSURE_MARGIN:
            raise EnclosureError(
                f"realization reaches {reach:.4f}, limit "
                f"{self.half_width - ENCLOSURE_MARGIN:.4f}"
            )


def build_interface(half_width: float = 2.0, grid_size: int = 9) -> ArtificialInterface:
    """24-patch cuboid with a grid_size^2 Gauss grid per patch."""
    surface = builtin_surface("cuboid", half_width=half_width)
    surf = reference_surface(build_landmarks(surface, 3))
    pts, nrm, wts, pid = [], [], [], []
    x, w = gauss_rule_01(grid_size)
    for ip in range(surf.n_patches):
        epts, _, _, enrm, area = surf.frame_grid(ip, x, x)
        pts.append(epts.reshape(-1, 3))
        nrm.append(enrm.reshape(-1, 3))
        wts.append((w[:, None] * w[None, :] * area).reshape(-1))
        pid.append(np.full(grid_size**2, ip))
    return ArtificialInterface(
        half_width,
        grid_size,
        np.vstack(pts),
        np.vstack(nrm),
        np.concatenate(wts),
        np.concatenate(pid),
    )


@dataclass(frozen=True)
class CauchyData:
    """Scattered-wave trace and normal derivative at the interface points."""

    values: np.ndarray = field(repr=False)
    normal_derivatives: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != self.normal_derivatives.shape:
            raise ValueError("trace vectors must have equal length")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.normal_derivatives))):
            raise ValueError("non-finite Cauchy data")

    def scaled(self, factor) -> "CauchyData":
        return CauchyData(factor * self.values, factor * self.normal_derivatives)


def cauchy_from_trace(disc, trace, iface: ArtificialInterface) -> CauchyData:
    """Evaluate the solved field and its normal derivative on the interface."""
    iface.check_enclosure(disc.colloc_points)
    values, grad = eval_scattered_with_gradient(disc, trace, iface.points)
    dn = np.einsum("ic,ic->i", grad, iface.normals.astype(complex))
    return CauchyData(values, dn)


def _representation_kernels(iface: ArtificialInterface, kappa: float, x: np.ndarray):
    """Matrices G, Gn with rows per evaluation point and columns per
    interface node: G = Phi * w, Gn = dPhi/dn_z * w."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(np.abs(x).max(axis=1) <= iface.half_width):
        raise ValueError("evaluation points must lie strictly outside the interface")
    diff = iface.points[None, :, :] - x[:, None, :]  # z - x
    r = np.linalg.norm(diff, axis=2)
    phi = np.exp(-1j * kappa * r) / (4.0 * np.pi * r)
    dn = phi * (-1j * kappa - 1.0 / r) * np.einsum("xzc,zc->xz", diff, iface.normals) / r
    return phi * iface.weights[None, :], dn * iface.weights[None, :]


def represent_exterior(iface: ArtificialInterface, cauchy: CauchyData, x, kappa: float):
    """Field outside the interface from its Cauchy data:
    u(x) = int_T { dPhi/dn_z u - Phi du/dn } dsigma_z."""
    g, gn = _representation_kernels(iface, kappa, x)
    out = gn @ cauchy.values - g @ cauchy.normal_derivatives
    return out[0] if np.asarray(x).ndim == 1 else out


@dataclass(frozen=True)
class InterfaceMoments:
    """First and (non-centered) second moments of interface Cauchy data.

    Second-moment blocks conjugate their second argument; ``cor_du`` is kept
    implicitly as the Hermitian adjoint of ``cor_ud``.
    """

    mean_u: np.ndarray = field(repr=False)
    mean_dn: np.ndarray = field(repr=False)
    cor_uu: np.ndarray = field(repr=False)
    cor_ud: np.ndarray = field(repr=False)
    cor_dd: np.ndarray = field(repr=False)

    @property
    def cor_du(self) -> np.ndarray:
        return self.cor_ud.conj().T

    @property
    def mean(self) -> CauchyData:
        return CauchyData(self.mean_u, self.mean_dn)

    def covariance_blocks(self):
        """Centered second moments (second moment minus mean outer product)."""
        return (
            self.cor_uu - np.outer(self.mean_u, self.mean_u.conj()),
            self.cor_ud - np.outer(self.mean_u, self.mean_dn.conj()),
            self.cor_dd - np.outer(self.mean_dn, self.mean_dn.conj()),
        )


def moments_from_samples(samples: list[CauchyData]) -> InterfaceMoments:
    """Plain Monte Carlo moments of a list of Cauchy data samples."""
    if not samples:
        raise ValueError("need at least one sample")
    n = len(samples)
    u = np.stack([s.values for s in samples])
    d = np.stack([s.normal_derivatives for s in samples])
    return InterfaceMoments(
        u.mean(axis=0),
        d.mean(axis=0),
        (u.conj().T @ u).T / n,
        (d.conj().T @ u).T / n,
        (d.conj().T @ d).T / n,
    )


def rank_one_moments(sample: CauchyData) -> InterfaceMoments:
    return moments_from_samples([sample])


def propagate_mean(iface: ArtificialInterface, moments: InterfaceMoments, x, kappa: float):
    """Mean field outside the interface (representation applied to means)."""
    return represent_exterior(iface, moments.mean, x, kappa)


def propagate_correlation(iface: ArtificialInterface, moments: InterfaceMoments,
                          x, x_prime, kappa: float):
    """Second moment E[u(x) conj(u(x'))] of the exterior field.

    Expands the representation formula pairwise into the four interface
    blocks; the result for a rank-one moment set factorizes exactly into
    represent_exterior(x) * conj(represent_exterior(x')).
    """
    cor = propagate_correlation_matrix(iface, moments, np.atleast_2d(x), np.atleast_2d(x_prime), kappa)
    return cor[0, 0] if np.asarray(x).ndim == 1 and np.asarray(x_prime).ndim == 1 else cor


def propagate_correlation_matrix(iface: ArtificialInterface, moments: InterfaceMoments,
                                 x, x_prime, kappa: float) -> np.ndarray:
    """Correlation at all point pairs of two evaluation sets, shape (nx, nx')."""
    g1, gn1 = _representation_kernels(iface, kappa, x)
    g2, gn2 = _representation_kernels(iface, kappa, x_prime)
    cor_du = moments.cor_du
    return (
        gn1 @ moments.cor_uu @ gn2.conj().T
        - gn1 @ moments.cor_ud @ g2.conj().T
        - g1 @ cor_du @ gn2.conj().T
        + g1 @ moments.cor_dd @ g2.conj().T
    )


MOMENTS_FORMAT_VERSION = 1


def save_moments(path_csv: str, path_blocks: str, iface: ArtificialInterface,
                 moments: InterfaceMoments) -> None:
    """Means as CSV rows (patch, i, j, x, y, z, re, im); blocks as an npz blob."""
    g = iface.grid_size
    with open(path_csv, "w", encoding="utf-8") as fh:
        fh.write("field,patch,i,j,x,y,z,re,im\n")
        for name, vec in (("u", moments.mean_u), ("dudn", moments.mean_dn)):
            for k in range(iface.n_points):
                patch = iface.patch_of[k]
                local = k - patch * g * g
                i, j = divmod(local, g)
                x, y, z = iface.points[k]
                fh.write(
                    f"{name},{patch},{i},{j},{x!r},{y!r},{z!r},"
                    f"{vec[k].real!r},{vec[k].imag!r}\n"
                )
    np.savez(
        path_blocks,
        version=MOMENTS_FORMAT_VERSION,
        shape=np.array(moments.cor_uu.shape),
        mean_u=moments.mean_u,
        mean_dn=moments.mean_dn,
        cor_uu=moments.cor_uu,
        cor_ud=moments.cor_ud,
        cor_dd=moments.cor_dd,
    )


def load_moments(path_blocks: str) -> InterfaceMoments:
    data = np.load(path_blocks)
    if int(data["version"]) != MOMENTS_FORMAT_VERSION:
        raise ValueError("unsupported moments blob version")
    return InterfaceMoments(
        data["mean_u"], data["mean_dn"], data["cor_uu"], data["cor_ud"], data["cor_dd"]
    )

"""Tensor-product rational B-spline patches over the unit square."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _validate_knots(knots: np.ndarray, degree: int, n_basis: int) -> None:
    if np.any(np.diff(knots) < 0):
        raise ValueError("knot vector must be nondecreasing")
    if abs(knots[0]) > 0 or abs(knots[-1] - 1.0) > 0:
        raise ValueError("knot vector must start at 0 and end at 1")
    if len(knots) != n_basis + degree + 1:
        raise ValueError("knot vector length inconsistent with control net")
    if np.any(knots[: degree + 1] != 0.0) or np.any(knots[-(degree + 1):] != 1.0):
        raise ValueError("open knot vector required (full end multiplicities)")


def bspline_basis(knots: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    """All B-spline basis functions at points ``x`` via Cox-de Boor recursion.

    Returns shape (len(x), n_basis).  The right endpoint is treated by the
    usual half-open convention with the last basis function set to 1 at x=1.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n_basis = len(knots) - degree - 1
    # degree-0 indicators on half-open spans, closed at the final span
    b = np.zeros((len(x), len(knots) - 1))
    for i in range(len(knots) - 1):
        if knots[i] < knots[i + 1]:
            b[:, i] = (x >= knots[i]) & (x < knots[i + 1])
    b[x >= knots[-1] - 1e-300, :] = 0.0
    last = np.searchsorted(knots, 1.0) - 1  # final nonempty span
    b[x >= 1.0, last] = 1.0
    for p in range(1, degree + 1):
        nb = b.shape[1] - 1
        bn = np.zeros((len(x), nb))
        for i in range(nb):
            left_den = knots[i + p] - knots[i]
            right_den = knots[i + p + 1] - knots[i + 1]
            term = 0.0
            if left_den > 0:
                term = (x - knots[i]) / left_den * b[:, i]
            if right_den > 0:
                term = term + (knots[i + p + 1] - x) / right_den * b[:, i + 1]
            bn[:, i] = term
        b = bn
    return b[:, :n_basis]


def bspline_basis_derivative(knots: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    """First derivatives of all basis functions at ``x``, shape (len(x), n_basis)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n_basis = len(knots) - degree - 1
    if degree == 0:
        return np.zeros((len(x), n_basis))
    lower = bspline_basis(knots, degree - 1, x)
    d = np.zeros((len(x), n_basis))
    for i in range(n_basis):
        den1 = knots[i + degree] - knots[i]
        if den1 > 0:
            d[:, i] += degree / den1 * lower[:, i]
        den2 = knots[i + degree + 1] - knots[i + 1]
        if den2 > 0:
            d[:, i] -= degree / den2 * lower[:, i + 1]
    return d


@dataclass(frozen=True)
class PatchMap:
    """One rational tensor B-spline patch s: [0,1]^2 -> R^3.

    ``control`` has shape (n1, n2, 3) and ``weights`` (n1, n2) with strictly
    positive entries; axis 0 follows the first parameter.
    """

    degrees: tuple[int, int]
    knots_u: np.ndarray = field(repr=False)
    knots_v: np.ndarray = field(repr=False)
    control: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        control = np.asarray(self.control, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if control.ndim != 3 or control.shape[2] != 3:
            raise ValueError("control net must have shape (n1, n2, 3)")
        if weights.shape != control.shape[:2]:
            raise ValueError("weight grid must match the control net")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        p1, p2 = self.degrees
        _validate_knots(np.asarray(self.knots_u, float), p1, control.shape[0])
        _validate_knots(np.asarray(self.knots_v, float), p2, control.shape[1])
        object.__setattr__(self, "control", control)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "knots_u", np.asarray(self.knots_u, float))
        object.__setattr__(self, "knots_v", np.asarray(self.knots_v, float))
        self.check_immersion()

    # -- evaluation ---------------------------------------------------------
    def eval_grid(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Evaluate on the tensor grid s x t; returns (len(s), len(t), 3)."""
        s = np.atleast_1d(np.asarray(s, float))
        t = np.atleast_1d(np.asarray(t, float))
        if np.any((s < 0) | (s > 1)) or np.any((t < 0) | (t > 1)):
            raise ValueError("parameters outside the unit square")
        bu = bspline_basis(self.knots_u, self.degrees[0], s)
        bv = bspline_basis(self.knots_v, self.degrees[1], t)
        hw = self.weights[None, None, :, :]
        num = np.einsum("si,tj,ijc,ij->stc", bu, bv, self.control, self.weights)
        den = np.einsum("si,tj,ij->st", bu, bv, self.weights)
        return num / den[:, :, None]

    def eval(self, s: float, t: float) -> np.ndarray:
        """Evaluate the patch at a single parameter point."""
        return self.eval_grid(np.array([s]), np.array([t]))[0, 0]

    def tangents(self, s: float, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Partial derivatives of the rational map at one parameter point."""
        s_arr, t_arr = np.array([float(s)]), np.array([float(t)])
        if np.any((s_arr < 0) | (s_arr > 1)) or np.any((t_arr < 0) | (t_arr > 1)):
            raise ValueError("parameters outside the unit square")
        bu = bspline_basis(self.knots_u, self.degrees[0], s_arr)[0]
        bv = bspline_basis(self.knots_v, self.degrees[1], t_arr)[0]
        du = bspline_basis_derivative(self.knots_u, self.degrees[0], s_arr)[0]
        dv = bspline_basis_derivative(self.knots_v, self.degrees[1], t_arr)[0]
        wc = self.weights[:, :, None] * self.control
        num = np.einsum("i,j,ijc->c", bu, bv, wc)
        den = np.einsum("i,j,ij->", bu, bv, self.weights)
        num_s = np.einsum("i,j,ijc->c", du, bv, wc)
        den_s = np.einsum("i,j,ij->", du, bv, self.weights)
        num_t = np.einsum("i,j,ijc->c", bu, dv, wc)
        den_t = np.einsum("i,j,ij->", bu, dv, self.weights)
        point = num / den
        return (num_s - point * den_s) / den, (num_t - point * den_t) / den

    def check_immersion(self, n_test: int = 7, tol: float = 1e-12) -> None:
        """Verify linear independence of the tangents on a fixed test grid."""
        pts = np.linspace(0.02, 0.98, n_test)
        bu = bspline_basis(self.knots_u, self.degrees[0], pts)
        bv = bspline_basis(self.knots_v, self.degrees[1], pts)
        du = bspline_basis_derivative(self.knots_u, self.degrees[0], pts)
        dv = bspline_basis_derivative(self.knots_v, self.degrees[1], pts)
        wc = self.weights[:, :, None] * self.control
        num = np.einsum("si,tj,ijc->stc", bu, bv, wc)
        den = np.einsum("si,tj,ij->st", bu, bv, self.weights)
        num_s = np.einsum("si,tj,ijc->stc", du, bv, wc)
        den_s = np.einsum("si,tj,ij->st", du, bv, self.weights)
        num_t = np.einsum("si,tj,ijc->stc", bu, dv, wc)
        den_t = np.einsum("si,tj,ij->st", bu, dv, self.weights)
        point = num / den[:, :, None]
        ts = (num_s - point * den_s[:, :, None]) / den[:, :, None]
        tt = (num_t - point * den_t[:, :, None]) / den[:, :, None]
        norms = np.linalg.norm(np.cross(ts, tt), axis=2)
        if np.any(norms <= tol):
            k = np.argwhere(norms <= tol)[0]
            raise ValueError(
                f"patch degenerates at (s={pts[k[0]]:.3f}, t={pts[k[1]]:.3f})"
            )


def patch_eval(patch: PatchMap, s: float, t: float) -> np.ndarray:
    """Point on the patch at parameters (s, t) in [0,1]^2."""
    return patch.eval(s, t)


def bezier_knots(degree: int) -> np.ndarray:
    """Open knot vector without interior knots (a single Bezier span)."""
    return np.array([0.0] * (degree + 1) + [1.0] * (degree + 1))

"""Chebyshev nodes on [0, 1] and stable barycentric interpolation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Below this distance an evaluation point is snapped to the node, which
# removes the 0/0 singularity of the barycentric formula exactly at nodes.
NODE_SNAP = 1e-14


@dataclass(frozen=True)
class ChebyshevGrid:
    """Chebyshev points of the second kind on [0, 1] with barycentric weights.

    Nodes are xi_k = (1 - cos(k*pi/q))/2 for k = 0..q, so xi_0 = 0 and
    xi_q = 1.  The weights are (-1)^k, halved at both endpoints; any common
    scaling of the weights cancels in the barycentric quotient.
    """

    degree: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1, a single node is a degenerate grid")


def chebyshev_grid(q: int) -> ChebyshevGrid:
    """Build the second-kind Chebyshev grid of degree ``q`` on [0, 1]."""
    if q < 1:
        raise ValueError("degree must be >= 1, a single node is a degenerate grid")
    k = np.arange(q + 1)
    nodes = 0.5 * (1.0 - np.cos(k * np.pi / q))
    nodes[0] = 0.0
    nodes[-1] = 1.0
    weights = (-1.0) ** k
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return ChebyshevGrid(q, nodes, weights)


def chebyshev_nodes_first_kind(n: int) -> tuple[np.ndarray, np.ndarray]:
    """First-kind Chebyshev points on (0, 1) and their barycentric weights.

    These nodes avoid the interval endpoints, which makes them suitable as
    interior collocation points.  For n = 1 the single node is the midpoint.
    """
    if n < 1:
        raise ValueError("need at least one node")
    k = np.arange(n)
    nodes = 0.5 * (1.0 - np.cos((2 * k + 1) * np.pi / (2 * n)))
    weights = (-1.0) ** k * np.sin((2 * k + 1) * np.pi / (2 * n))
    return nodes, weights


def bary_eval_1d(grid: ChebyshevGrid, values, s: float) -> float | complex:
    """Evaluate the interpolant of nodal ``values`` at a single point ``s``."""
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise ValueError("nodal values must be finite")
    diff = s - grid.nodes
    hit = np.abs(diff) < NODE_SNAP
    if np.any(hit):
        return values[int(np.argmax(hit))]
    kernel = grid.weights / diff
    return kernel @ values / np.sum(kernel)


def interp_matrix(nodes: np.ndarray, weights: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Rows of barycentric cardinal values: ``interp_matrix(...) @ f`` evaluates
    the interpolant of nodal values ``f`` at every point of ``s``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    diff = s[:, None] - nodes[None, :]
    hit = np.abs(diff) < NODE_SNAP
    if hit.any():
        diff = np.where(hit, 1.0, diff)
        kernel = weights[None, :] / diff
        rows_hit = hit.any(axis=1)
        kernel[rows_hit] = hit[rows_hit]
    else:
        kernel = weights[None, :] / diff
    return kernel / kernel.sum(axis=1, keepdims=True)


def diff_matrix(nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Spectral differentiation matrix for the Lagrange basis on ``nodes``.

    Applying it to nodal values gives nodal values of the interpolant's
    derivative; the diagonal uses the negative row-sum trick for stability.
    """
    n = len(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    d = (weights[None, :] / weights[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def tensor_eval(grid: ChebyshevGrid, nodal: np.ndarray, s: float, t: float) -> np.ndarray:
    """Evaluate a tensor-product interpolant at one parameter point.

    ``nodal`` has shape (q+1, q+1, ...) with axis 0 indexed by the s-node and
    axis 1 by the t-node; trailing axes are carried through.
    """
    us = interp_matrix(grid.nodes, grid.weights, np.array([s]))[0]
    ut = interp_matrix(grid.nodes, grid.weights, np.array([t]))[0]
    return np.einsum("j,k,jk...->...", us, ut, nodal)

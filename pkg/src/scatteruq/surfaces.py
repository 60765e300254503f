"""Closed multipatch surfaces, landmark grids, and interpolated realizations."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .chebyshev import ChebyshevGrid, chebyshev_grid, diff_matrix, interp_matrix
from .nurbs import PatchMap, bezier_knots, bspline_basis

EDGE_COINCIDENCE_TOL = 1e-10
LANDMARK_DEDUP_TOL = 1e-9
DEGENERATE_TANGENT_TOL = 1e-12

# edge numbering: 0 -> t=0, 1 -> s=1, 2 -> t=1, 3 -> s=0
_EDGE_PARAMS = {
    0: lambda u: (u, np.zeros_like(u)),
    1: lambda u: (np.ones_like(u), u),
    2: lambda u: (u, np.ones_like(u)),
    3: lambda u: (np.zeros_like(u), u),
}


def _edge_points(patch: PatchMap, edge: int, u: np.ndarray) -> np.ndarray:
    s, t = _EDGE_PARAMS[edge](u)
    return np.array([patch.eval(si, ti) for si, ti in zip(s, t)])


def compute_adjacency(patches, samples: int = 10, tol: float = EDGE_COINCIDENCE_TOL):
    """Match patch edges pairwise by sampled coincidence.

    Returns 5-tuples (patch, edge, patch', edge', orient) with orient = +1 for
    equally directed parametrizations and -1 for reversed ones.
    """
    u = np.linspace(0.0, 1.0, samples)
    edges = {}
    for ip, patch in enumerate(patches):
        for e in range(4):
            edges[(ip, e)] = _edge_points(patch, e, u)
    keys = sorted(edges)
    adjacency = []
    seen = set()
    for a in keys:
        if a in seen:
            continue
        for b in keys:
            if b <= a or b in seen or b[0] == a[0]:
                continue
            fwd = np.linalg.norm(edges[a] - edges[b], axis=1).max()
            rev = np.linalg.norm(edges[a] - edges[b][::-1], axis=1).max()
            if min(fwd, rev) < tol:
                adjacency.append((a[0], a[1], b[0], b[1], 1 if fwd <= rev else -1))
                seen.add(a)
                seen.add(b)
                break
    return adjacency


@dataclass(frozen=True)
class MultiPatchSurface:
    """A closed surface assembled from parametric patches.

    ``orientation`` holds per-patch signs so that
    orientation * (d_s x d_t) points out of the enclosed volume.
    """

    patches: list = field(repr=False)
    adjacency: list = field(repr=False)
    orientation: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.linspace(0.0, 1.0, 10)
        for ip, e, jp, f, orient in self.adjacency:
            pa = _edge_points(self.patches[ip], e, u)
            pb = _edge_points(self.patches[jp], f, u if orient == 1 else u[::-1])
            gap = np.linalg.norm(pa - pb, axis=1).max()
            if gap > EDGE_COINCIDENCE_TOL:
                raise ValueError(
                    f"declared shared edge ({ip},{e})-({jp},{f}) has gap {gap:.2e}"
                )

    @property
    def n_patches(self) -> int:
        return len(self.patches)

    def patch_grids(self, s_nodes: np.ndarray) -> np.ndarray:
        """Evaluate every patch on the tensor grid s_nodes x s_nodes."""
        return np.array([p.eval_grid(s_nodes, s_nodes) for p in self.patches])


def _orientation_signs(patches, outward_hint) -> np.ndarray:
    signs = np.empty(len(patches))
    for i, patch in enumerate(patches):
        ts, tt = patch.tangents(0.5, 0.5)
        center = patch.eval(0.5, 0.5)
        signs[i] = np.sign(np.dot(np.cross(ts, tt), outward_hint(center)))
        if signs[i] == 0:
            raise ValueError(f"cannot orient patch {i}")
    return signs


# --------------------------------------------------------------------------
# built-in geometries
# --------------------------------------------------------------------------

_ARC_W = np.array([1.0, np.sqrt(0.5), 1.0])


def _quarter_arc(start: float) -> np.ndarray:
    """Control points of a unit quarter circle from angle ``start`` (weights _ARC_W)."""
    a0, a1, a2 = start, start + np.pi / 4, start + np.pi / 2
    return np.array(
        [
            [np.cos(a0), np.sin(a0)],
            [np.cos(a1) / np.cos(np.pi / 4), np.sin(a1) / np.cos(np.pi / 4)],
            [np.cos(a2), np.sin(a2)],
        ]
    )


def torus_surface(major_radius: float = 0.75, minor_radius: float = 0.25) -> MultiPatchSurface:
    """Torus split into 4 x 4 = 16 exact rational biquadratic patches.

    Patch (i, j) covers the angle box [i, i+1] x [j, j+1] * pi/2 with s along
    the major angle and t along the tube angle; (s, t) = (0, 0) of patch
    (0, 0) is the outer-equator point (R + r, 0, 0).
    """
    R, r = major_radius, minor_radius
    if not (R > r > 0):
        raise ValueError("torus radii must satisfy R > r > 0")
    patches = []
    knots = bezier_knots(2)
    for i in range(4):
        ring = _quarter_arc(i * np.pi / 2)
        for j in range(4):
            tube = _quarter_arc(j * np.pi / 2)  # columns: (cos phi, sin phi)
            gx = R + r * tube[:, 0]
            gz = r * tube[:, 1]
            ctrl = np.empty((3, 3, 3))
            ctrl[:, :, 0] = ring[:, 0][:, None] * gx[None, :]
            ctrl[:, :, 1] = ring[:, 1][:, None] * gx[None, :]
            ctrl[:, :, 2] = gz[None, :]
            weights = _ARC_W[:, None] * _ARC_W[None, :]
            patches.append(PatchMap((2, 2), knots, knots, ctrl, weights))

    def hint(p):
        ring_pt = np.array([p[0], p[1], 0.0])
        nrm = np.linalg.norm(ring_pt[:2])
        ring_pt *= R / nrm
        return p - ring_pt

    return MultiPatchSurface(patches, compute_adjacency(patches), _orientation_signs(patches, hint))


_FACE_FRAMES = [
    # right-handed (u, v, w); w is the outward face direction
    (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0])),
    (np.array([0, 1.0, 0]), np.array([1.0, 0, 0]), np.array([0, 0, -1.0])),
    (np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), np.array([1.0, 0, 0])),
    (np.array([0, 0, 1.0]), np.array([0, 1.0, 0]), np.array([-1.0, 0, 0])),
    (np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])),
    (np.array([1.0, 0, 0]), np.array([0, 0, 1.0]), np.array([0, -1.0, 0])),
]


def _slerp_square(c00, c10, c01, c11, s, t):
    """Spherical bilinear patch on the tensor grid s x t -> (ns, nt, 3)."""
    s = np.atleast_1d(s)
    t = np.atleast_1d(t)
    ang_b = np.arccos(np.clip(c00 @ c10, -1, 1))
    ang_t = np.arccos(np.clip(c01 @ c11, -1, 1))
    low = (np.sin((1 - s) * ang_b)[:, None] * c00 + np.sin(s * ang_b)[:, None] * c10) / np.sin(ang_b)
    upp = (np.sin((1 - s) * ang_t)[:, None] * c01 + np.sin(s * ang_t)[:, None] * c11) / np.sin(ang_t)
    dot = np.clip(np.einsum("sc,sc->s", low, upp), -1, 1)
    g = np.arccos(dot)
    out = (
        np.sin((1 - t)[None, :] * g[:, None])[:, :, None] * low[:, None, :]
        + np.sin(t[None, :] * g[:, None])[:, :, None] * upp[:, None, :]
    ) / np.sin(g)[:, None, None]
    return out


def _greville(knots: np.ndarray, degree: int) -> np.ndarray:
    n = len(knots) - degree - 1
    return np.array([knots[i + 1 : i + degree + 1].mean() for i in range(n)])


def _fit_spline_patch(sample_fn, degree: int = 10, spans: int = 16) -> PatchMap:
    """Tensor spline interpolation of a smooth map at Greville points.

    Interpolation (rather than least squares) keeps patch edges equal to the
    1D interpolants of the edge curves, so adjacent fits match exactly.
    """
    interior = np.linspace(0.0, 1.0, spans + 1)[1:-1]
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    g = _greville(knots, degree)
    coll = bspline_basis(knots, degree, g)
    inv = np.linalg.inv(coll)
    values = sample_fn(g, g)
    ctrl = np.einsum("ij,jkc,lk->ilc", inv, values, inv)
    return PatchMap((degree, degree), knots, knots, ctrl, np.ones(ctrl.shape[:2]))


def sphere_surface(radius: float = 1.0) -> MultiPatchSurface:
    """Sphere tiled by the six spherical squares over the cube faces.

    Each patch interpolates the spherical-bilinear parametrization of its
    square by a tensor spline; the fit is accurate to ~1e-12 and shared edges
    coincide exactly because boundary interpolation decouples.
    """
    if radius <= 0:
        raise ValueError("sphere radius must be positive")
    patches = []
    for u_dir, v_dir, w_dir in _FACE_FRAMES:
        corners = [
            (su * u_dir + sv * v_dir + w_dir) / np.sqrt(3.0)
            for sv in (-1, 1)
            for su in (-1, 1)
        ]
        c00, c10, c01, c11 = corners
        fn = lambda s, t, c=(c00, c10, c01, c11): radius * _slerp_square(*c, s, t)
        patches.append(_fit_spline_patch(fn))
    return MultiPatchSurface(
        patches, compute_adjacency(patches), _orientation_signs(patches, lambda p: p)
    )


def cuboid_surface(half_width: float = 2.0) -> MultiPatchSurface:
    """Axis-aligned cuboid boundary; each face is split into 2 x 2 flat patches."""
    if half_width <= 0:
        raise ValueError("cuboid half-width must be positive")
    h = half_width
    knots = bezier_knots(1)
    patches = []
    for u_dir, v_dir, w_dir in _FACE_FRAMES:
        for a in range(2):
            for b in range(2):
                u0, u1 = -h + a * h, -h + (a + 1) * h
                v0, v1 = -h + b * h, -h + (b + 1) * h
                ctrl = np.empty((2, 2, 3))
                for ii, uu in enumerate((u0, u1)):
                    for jj, vv in enumerate((v0, v1)):
                        ctrl[ii, jj] = uu * u_dir + vv * v_dir + h * w_dir
                patches.append(PatchMap((1, 1), knots, knots, ctrl, np.ones((2, 2))))
    return MultiPatchSurface(
        patches, compute_adjacency(patches), _orientation_signs(patches, lambda p: p)
    )


def builtin_surface(name: str, **params) -> MultiPatchSurface:
    """Construct one of the built-in closed surfaces: torus, sphere, cuboid."""
    builders = {"torus": torus_surface, "sphere": sphere_surface, "cuboid": cuboid_surface}
    if name not in builders:
        raise ValueError(f"unknown built-in surface {name!r}")
    return builders[name](**params)


# --------------------------------------------------------------------------
# landmarks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LandmarkSet:
    """Mapped tensor Chebyshev nodes of all patches with global deduplication."""

    grid: ChebyshevGrid
    points: np.ndarray = field(repr=False)  # (n, 3) deduplicated
    global_index: np.ndarray = field(repr=False)  # (M, q+1, q+1)
    orientation: np.ndarray = field(repr=False)  # (M,)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def n_patches(self) -> int:
        return self.global_index.shape[0]

    def patch_values(self, global_values: np.ndarray) -> np.ndarray:
        """Scatter per-global-point data onto per-patch nodal grids."""
        return np.asarray(global_values)[self.global_index]


def build_landmarks(surface, q: int) -> LandmarkSet:
    """Map each patch's Chebyshev grid and merge coincident points globally."""
    grid = chebyshev_grid(q)
    grids = surface.patch_grids(grid.nodes)  # (M, q+1, q+1, 3)
    m, n1, n2, _ = grids.shape
    flat = grids.reshape(-1, 3)
    tree = cKDTree(flat)
    parent = np.arange(len(flat))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(LANDMARK_DEDUP_TOL):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(flat))])
    unique_roots, global_ids = np.unique(roots, return_inverse=True)
    points = flat[unique_roots]
    return LandmarkSet(grid, points, global_ids.reshape(m, n1, n2), surface.orientation.copy())


# --------------------------------------------------------------------------
# interpolated surfaces
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InterpolatedSurface:
    """A surface realization given by nodal values on tensor Chebyshev grids."""

    grid: ChebyshevGrid
    nodal: np.ndarray = field(repr=False)  # (M, q+1, q+1, 3)
    orientation: np.ndarray = field(repr=False)  # (M,)

    @property
    def n_patches(self) -> int:
        return self.nodal.shape[0]

    def _ops(self, s: np.ndarray, t: np.ndarray):
        es = interp_matrix(self.grid.nodes, self.grid.weights, np.atleast_1d(s))
        et = interp_matrix(self.grid.nodes, self.grid.weights, np.atleast_1d(t))
        return es, et

    def eval(self, patch: int, s: float, t: float) -> np.ndarray:
        es, et = self._ops(np.array([s]), np.array([t]))
        return np.einsum("ai,ijc,bj->abc", es, self.nodal[patch], et)[0, 0]

    def eval_grid(self, patch: int, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        es, et = self._ops(s, t)
        return np.einsum("ai,ijc,bj->abc", es, self.nodal[patch], et)

    def patch_grids(self, s_nodes: np.ndarray) -> np.ndarray:
        es, et = self._ops(s_nodes, s_nodes)
        return np.einsum("ai,pijc,bj->pabc", es, self.nodal, et)

    def frame_grid(self, patch: int, s: np.ndarray, t: np.ndarray):
        """Points, tangents, outward unit normals, and area elements on s x t.

        Tangents come from spectral differentiation of the interpolant.
        """
        es, et = self._ops(s, t)
        d = diff_matrix(self.grid.nodes, self.grid.weights)
        nod = self.nodal[patch]
        pts = np.einsum("ai,ijc,bj->abc", es, nod, et)
        ts = np.einsum("ai,ijc,bj->abc", es @ d, nod, et)
        tt = np.einsum("ai,ijc,bj->abc", es, nod, et @ d)
        raw = np.cross(ts, tt)
        area = np.linalg.norm(raw, axis=-1)
        if np.any(area < DEGENERATE_TANGENT_TOL):
            raise ValueError(f"degenerate tangents on patch {patch}")
        normal = self.orientation[patch] * raw / area[..., None]
        return pts, ts, tt, normal, area


def surface_from_nodal(landmarks: LandmarkSet, nodal_values) -> InterpolatedSurface:
    """Assemble a realization from per-patch nodal grids.

    Values at nodes sharing a global id must be identical; otherwise the
    patches would no longer join into a continuous surface.
    """
    nodal = np.asarray(nodal_values, dtype=float)
    expected = landmarks.global_index.shape + (3,)
    if nodal.shape != expected:
        raise ValueError(f"nodal grids must have shape {expected}, got {nodal.shape}")
    flat_ids = landmarks.global_index.reshape(-1)
    flat_vals = nodal.reshape(-1, 3)
    order = np.argsort(flat_ids, kind="stable")
    sid, sval = flat_ids[order], flat_vals[order]
    first = np.searchsorted(sid, np.arange(landmarks.n))
    rep = sval[first][sid]
    if np.any(np.abs(sval - rep) > 0):
        raise ValueError("nodal values differ at shared global ids")
    return InterpolatedSurface(landmarks.grid, nodal, landmarks.orientation.copy())


def surface_from_global(landmarks: LandmarkSet, global_points: np.ndarray) -> InterpolatedSurface:
    """Assemble a realization from one value per global landmark point."""
    global_points = np.asarray(global_points, dtype=float)
    if global_points.shape != (landmarks.n, 3):
        raise ValueError(f"expected shape {(landmarks.n, 3)}")
    return InterpolatedSurface(
        landmarks.grid, landmarks.patch_values(global_points), landmarks.orientation.copy()
    )


def reference_surface(landmarks: LandmarkSet) -> InterpolatedSurface:
    """The undeformed realization interpolating the landmark points themselves."""
    return surface_from_global(landmarks, landmarks.points)


def surface_jacobian_normal(surf: InterpolatedSurface, patch: int, s: float, t: float):
    """Tangents, outward unit normal, and area element at one parameter point."""
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise ValueError("parameters outside the unit square")
    pts, ts, tt, normal, area = surf.frame_grid(patch, np.array([s]), np.array([t]))
    return ts[0, 0], tt[0, 0], normal[0, 0], area[0, 0]


@lru_cache(maxsize=64)
def _gauss_cached(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule_01(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if order < 1:
        raise ValueError("order must be >= 1")
    return _gauss_cached(int(order))


def patch_quadrature(surf: InterpolatedSurface, patch: int, order: int):
    """Tensor Gauss rule on one patch with weights scaled by the area element.

    Returns (params (n,2), points (n,3), weights (n,)).
    """
    x, w = gauss_rule_01(order)
    pts, _, _, _, area = surf.frame_grid(patch, x, x)
    params = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    weights = (w[:, None] * w[None, :] * area).reshape(-1)
    return params, pts.reshape(-1, 3), weights


def surface_area(surf: InterpolatedSurface, order: int = 12) -> float:
    """Total area by patchwise Gauss quadrature of the area element."""
    return sum(patch_quadrature(surf, p, order)[2].sum() for p in range(surf.n_patches))

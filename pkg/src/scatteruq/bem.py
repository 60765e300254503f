"""Sound-soft Helmholtz CFIE collocation solver on interpolated surfaces.

The discretization is discontinuous per-element tensor interpolatory
collocation: each patch is split into 2 x 2 elements and every element
carries a tensor Lagrange basis on first-kind Chebyshev nodes, so all
collocation points are distinct interior surface points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .chebyshev import chebyshev_nodes_first_kind, interp_matrix
from .surfaces import InterpolatedSurface, gauss_rule_01

NEAR_FACTOR = 1.5
SELF_RULE_FACTOR = 2  # scales the per-direction budget of peak-centered rules


@dataclass(frozen=True)
class WaveSetup:
    """Incident plane wave exp(-i*kappa*<d, x>) with CFIE coupling kappa/2."""

    wavenumber: float
    direction: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.wavenumber <= 0:
            raise ValueError("wavenumber must be positive")
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        object.__setattr__(self, "direction", d)

    @property
    def coupling(self) -> float:
        return self.wavenumber / 2.0


def fundamental_solution(kappa: float, x, z):
    """Free-space kernel exp(-i*kappa*r) / (4*pi*r); coincident points rejected."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(x - z, axis=-1)
    if np.any(r == 0):
        raise ValueError("coincident evaluation and source point")
    return np.exp(-1j * kappa * r) / (4.0 * np.pi * r)


def fundamental_gradient_x(kappa: float, x, z):
    """Gradient of the kernel in its first argument, shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    diff = x - z
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0):
        raise ValueError("coincident evaluation and source point")
    phi = np.exp(-1j * kappa * r) / (4.0 * np.pi * r)
    radial = phi * (-1j * kappa - 1.0 / r) / r
    return radial[..., None] * diff


def incident_wave(wave: WaveSetup, x):
    x = np.asarray(x, dtype=float)
    return np.exp(-1j * wave.wavenumber * (x @ wave.direction))


def incident_gradient(wave: WaveSetup, x):
    u = incident_wave(wave, x)
    return (-1j * wave.wavenumber) * u[..., None] * wave.direction


def _element_rects(n_sub: int = 2):
    step = 1.0 / n_sub
    return [
        (a * step, (a + 1) * step, b * step, (b + 1) * step)
        for a in range(n_sub)
        for b in range(n_sub)
    ]


def _sinh_nodes(g: np.ndarray, w: np.ndarray, scale: float):
    """Reparametrize [0,1] Gauss nodes to cluster near 0 at the given scale."""
    if scale >= 0.8:
        return g, w
    scale = max(scale, 1e-8)
    mu = np.arcsinh(1.0 / scale)
    return scale * np.sinh(mu * g), w * scale * mu * np.cosh(mu * g)


@lru_cache(maxsize=8192)
def _duffy_cached(u0: float, v0: float, n: int, delta: float):
    g, w = gauss_rule_01(n)
    a1, wa = _sinh_nodes(g, w, delta if delta > 0 else 1.0)
    rects = [
        (su, wu, sv, wv)
        for su, wu in ((-1.0, u0), (1.0, 1.0 - u0))
        for sv, wv in ((-1.0, v0), (1.0, 1.0 - v0))
        if wu >= 1e-15 and wv >= 1e-15
    ]
    n2 = n * n
    out_p = np.empty((2 * len(rects) * n2, 2))
    out_w = np.empty(2 * len(rects) * n2)
    pos = 0
    for su, wu, sv, wv in rects:
        # triangle with |dv| <= |du| and its reflection; the angular
        # integrand varies at scale sqrt(delta^2 + short^2) / long
        for short, long_, swap in ((wu, wv, False), (wv, wu, True)):
            b_scale = min(np.sqrt(delta**2 + short**2) / long_, 1.0)
            b1, wb = _sinh_nodes(g, w, b_scale)
            aa = np.broadcast_to(a1[:, None], (n, n))
            bb = aa * b1[None, :]
            xa, xb = (aa, bb) if not swap else (bb, aa)
            sl = slice(pos, pos + n2)
            out_p[sl, 0] = (u0 + su * wu * xa).ravel()
            out_p[sl, 1] = (v0 + sv * wv * xb).ravel()
            out_w[sl] = (wa[:, None] * wb[None, :] * aa).ravel() * (wu * wv)
            pos += n2
    out_p.setflags(write=False)
    out_w.setflags(write=False)
    return out_p, out_w


def _duffy_triangles(u0: float, v0: float, n: int, delta: float = 0.0):
    """Quadrature on [0,1]^2 resolving a 1/r peak at (u0, v0).

    The square is split at the peak into up to four rectangles and each
    rectangle into two Duffy triangles whose Jacobian cancels the
    singularity.  Two sinh reparametrizations keep the rule accurate at
    moderate n: the radial variable resolves a peak at height ``delta``
    above the element, and the angular variable resolves the boundary
    layer of thin rectangles (aspect-ratio scale).  ``delta`` is bucketed
    so repeated rules hit a cache.
    """
    if delta > 0.0:
        delta = float(np.exp(np.round(np.log(delta) * 4.0) / 4.0))
    return _duffy_cached(round(float(u0), 12), round(float(v0), 12), int(n), delta)


class BoundaryDiscretization:
    """Per-element interpolatory collocation space on a surface realization.

    ``shared_from`` reuses the degree-independent geometry tables (element
    list and dyadic lookup grids) of another discretization of the same
    surface, which saves rebuilding them for coupled-degree solves.
    """

    def __init__(self, surface: InterpolatedSurface, degree: int, quad_order: int | None = None,
                 shared_from: "BoundaryDiscretization | None" = None):
        if degree < 0:
            raise ValueError("ansatz degree must be nonnegative")
        self.surface = surface
        self.degree = degree
        self.quad_order = quad_order if quad_order is not None else degree + 2
        if self.quad_order < degree + 2:
            raise ValueError("quadrature order must be at least degree + 2")

        from .chebyshev import diff_matrix

        self._dmat = diff_matrix(surface.grid.nodes, surface.grid.weights)
        p = degree
        self.nodes_1d, self.weights_1d = chebyshev_nodes_first_kind(p + 1)
        self.n_loc = (p + 1) ** 2
        self.rects = _element_rects()
        m = surface.n_patches
        self.elements = [(ip, rect) for ip in range(m) for rect in self.rects]
        self.n_elements = len(self.elements)
        self.n_dof = self.n_elements * self.n_loc

        # collocation data
        pts = np.empty((self.n_dof, 3))
        nrm = np.empty((self.n_dof, 3))
        for e, (ip, (s0, s1, t0, t1)) in enumerate(self.elements):
            s = s0 + self.nodes_1d * (s1 - s0)
            t = t0 + self.nodes_1d * (t1 - t0)
            epts, _, _, enrm, _ = surface.frame_grid(ip, s, t)
            sl = slice(e * self.n_loc, (e + 1) * self.n_loc)
            pts[sl] = epts.reshape(-1, 3)
            nrm[sl] = enrm.reshape(-1, 3)
        self.colloc_points = pts
        self.colloc_normals = nrm
        if self.n_dof > 1:
            from scipy.spatial import cKDTree

            d_min, _ = cKDTree(pts).query(pts, k=2)
            if np.min(d_min[:, 1]) <= 1e-12:
                raise ValueError("collocation points are not distinct")

        # regular tensor Gauss data per element
        gx, gw = gauss_rule_01(self.quad_order)
        nq = self.quad_order**2
        self.n_quad = nq
        zq = np.empty((self.n_elements, nq, 3))
        wq = np.empty((self.n_elements, nq))
        for e, (ip, (s0, s1, t0, t1)) in enumerate(self.elements):
            s = s0 + gx * (s1 - s0)
            t = t0 + gx * (t1 - t0)
            epts, _, _, _, area = surface.frame_grid(ip, s, t)
            zq[e] = epts.reshape(-1, 3)
            wq[e] = (gw[:, None] * gw[None, :] * area).reshape(-1) * (s1 - s0) * (t1 - t0)
        self.quad_points = zq
        self.quad_weights = wq
        eu = interp_matrix(self.nodes_1d, self.weights_1d, gx)
        self.basis_at_quad = np.einsum("ai,bj->abij", eu, eu).reshape(nq, self.n_loc)

        centers = zq.mean(axis=1)
        radii = np.linalg.norm(zq - centers[:, None, :], axis=2).max(axis=1)
        self.elem_centers = centers
        self.elem_radii = radii

        # physical points on the dyadic grid i/32 support the projected-peak
        # searches; they do not depend on the ansatz degree
        if shared_from is not None and shared_from.surface is surface:
            self.refine_lookup = shared_from.refine_lookup
        else:
            grid32 = np.arange(33) / 32.0
            look = np.empty((self.n_elements, 33, 33, 3))
            for e, (ip, (s0, s1, t0, t1)) in enumerate(self.elements):
                s = s0 + grid32 * (s1 - s0)
                t = t0 + grid32 * (t1 - t0)
                epts, _, _, _, _ = surface.frame_grid(ip, s, t)
                look[e] = epts
            self.refine_lookup = look

    # -- helpers -------------------------------------------------------------
    def basis_at(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Element-local tensor Lagrange basis at scattered local points."""
        eu = interp_matrix(self.nodes_1d, self.weights_1d, u)
        ev = interp_matrix(self.nodes_1d, self.weights_1d, v)
        return (eu[:, :, None] * ev[:, None, :]).reshape(len(u), self.n_loc)

    def element_scattered(self, e: int, local: np.ndarray):
        """Surface points and area elements at element-local points (k, 2).

        Values and the s-tangent share one GEMM against the nodal grid; the
        t-contractions reduce contiguous (k, nq, 3) blocks.
        """
        ip, (s0, s1, t0, t1) = self.elements[e]
        nq = self.surface.grid.degree + 1
        nod33 = self.surface.nodal[ip].reshape(nq, nq * 3)
        s = s0 + local[:, 0] * (s1 - s0)
        t = t0 + local[:, 1] * (t1 - t0)
        es = interp_matrix(self.surface.grid.nodes, self.surface.grid.weights, s)
        et = interp_matrix(self.surface.grid.nodes, self.surface.grid.weights, t)
        k = len(s)
        both = np.empty((2 * k, nq))
        both[:k] = es
        both[k:] = es @ self._dmat
        prod = both @ nod33
        val_s = prod[:k].reshape(k, nq, 3)
        der_s = prod[k:].reshape(k, nq, 3)
        et3 = np.ascontiguousarray(et)[:, :, None]
        pts = (val_s * et3).sum(axis=1)
        ts = (der_s * et3).sum(axis=1)
        tt = (val_s * (et @ self._dmat)[:, :, None]).sum(axis=1)
        cx = ts[:, 1] * tt[:, 2] - ts[:, 2] * tt[:, 1]
        cy = ts[:, 2] * tt[:, 0] - ts[:, 0] * tt[:, 2]
        cz = ts[:, 0] * tt[:, 1] - ts[:, 1] * tt[:, 0]
        area = np.sqrt(cx * cx + cy * cy + cz * cz)
        return pts, area * (s1 - s0) * (t1 - t0)

    def density_at_quad(self, coefficients: np.ndarray) -> np.ndarray:
        """Density values at all regular quadrature points, shape (E, nq)."""
        coef = coefficients.reshape(self.n_elements, self.n_loc)
        return coef @ self.basis_at_quad.T


@dataclass(frozen=True)
class NeumannTrace:
    """Coefficients of the outward Neumann trace of the total wave."""

    coefficients: np.ndarray = field(repr=False)
    wave: WaveSetup
    residual: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("non-finite trace coefficients")

    def scaled(self, factor) -> "NeumannTrace":
        return NeumannTrace(factor * self.coefficients, self.wave, self.residual)


def _row_kernel(disc, wave, rows, z):
    """CFIE kernel d(Phi)/dn_x - i*eta*Phi for given collocation rows at points z.

    Coincident points yield 0; such entries only occur inside corrected
    pairs where the regular contribution is subtracted again exactly.
    """
    x = disc.colloc_points[rows][:, None, :]
    n = disc.colloc_normals[rows][:, None, :]
    diff = x - z[None, :, :]
    r = np.linalg.norm(diff, axis=2)
    hit = r < 1e-14
    r = np.where(hit, 1.0, r)
    phi = np.exp(-1j * wave.wavenumber * r) / (4.0 * np.pi * r)
    phi[hit] = 0.0
    dphi_dnx = phi * (-1j * wave.wavenumber - 1.0 / r) * np.einsum("rkc,rkc->rk", diff, n) / r
    return dphi_dnx - 1j * wave.coupling * phi


def _correction_pairs(disc):
    """(row, element) pairs needing singular or near-singular treatment."""
    x = disc.colloc_points
    d = np.linalg.norm(x[:, None, :] - disc.elem_centers[None, :, :], axis=2)
    near = d < NEAR_FACTOR * disc.elem_radii[None, :]
    own = np.repeat(np.arange(disc.n_elements), disc.n_loc)
    near[np.arange(disc.n_dof), own] = False
    return own, near


def _closest_params_batch(disc, e: int, x: np.ndarray, refine: int = 2):
    """Closest element-local parameters to each point of x (r, 3), batched.

    Coarse search on the dyadic lookup grid followed by local 5x5 zooms.
    Returns (u, v, distance) arrays of length r.
    """
    look = disc.refine_lookup[e].reshape(-1, 3)
    d2 = ((look[None, :, :] - x[:, None, :]) ** 2).sum(axis=2)
    k = np.argmin(d2, axis=1)
    u = (k // 33) / 32.0
    v = (k % 33) / 32.0
    dmin = np.sqrt(d2[np.arange(len(x)), k])
    h = 1.0 / 32.0
    offsets = np.arange(-2.0, 3.0)
    r = len(x)
    for _ in range(refine):
        h /= 4.0
        uu = np.clip(u[:, None] + h * offsets[None, :], 0.0, 1.0)  # (r, 5)
        vv = np.clip(v[:, None] + h * offsets[None, :], 0.0, 1.0)
        loc = np.empty((r, 25, 2))
        loc[:, :, 0] = np.repeat(uu, 5, axis=1)
        loc[:, :, 1] = np.tile(vv, (1, 5))
        pts, _ = disc.element_scattered(e, loc.reshape(-1, 2))
        d2l = ((pts.reshape(r, 25, 3) - x[:, None, :]) ** 2).sum(axis=2)
        k = np.argmin(d2l, axis=1)
        u = loc[np.arange(r), k, 0]
        v = loc[np.arange(r), k, 1]
        dmin = np.sqrt(d2l[np.arange(r), k])
    return u, v, dmin


def _rule_points(degree: int, delta: float) -> int:
    """Per-direction point budget, shrinking with peak separation."""
    base = int(np.ceil(0.7 * SELF_RULE_FACTOR * (degree + 2))) + 1
    if delta < 0.02:
        return base
    if delta < 0.1:
        return max(base - 2, degree + 3)
    if delta < 0.3:
        return degree + 3
    return degree + 2


def _kernel_pointwise(disc, wave, row_ids, z, kernel: str):
    """Kernel values paired pointwise: row row_ids[k] against source z[k]."""
    x = disc.colloc_points[row_ids]
    diff = x - z
    r = np.sqrt((diff * diff).sum(axis=1))
    hit = r < 1e-14
    if np.any(hit):
        r = np.where(hit, 1.0, r)
    phi = np.exp(-1j * wave.wavenumber * r) / (4.0 * np.pi * r)
    if np.any(hit):
        phi[hit] = 0.0
    if kernel == "single":
        return phi
    n = disc.colloc_normals[row_ids]
    dphi_dnx = phi * (-1j * wave.wavenumber - 1.0 / r) * (diff * n).sum(axis=1) / r
    return dphi_dnx - 1j * wave.coupling * phi


def _assemble_collocation(disc, wave, kernel: str):
    """Collocation matrix of the layer-potential part for the given kernel.

    kernel: "cfie" for K* - i*eta*V rows, "single" for V alone.  The regular
    tensor rule covers all pairs first; singular and near pairs then swap in
    peak-centered Duffy rules, batched per source element.
    """

    def kern_block(rows, z):
        if kernel == "cfie":
            return _row_kernel(disc, wave, rows, z)
        x = disc.colloc_points[rows][:, None, :]
        r = np.linalg.norm(x - z[None, :, :], axis=2)
        hit = r < 1e-14
        r = np.where(hit, 1.0, r)
        out = np.exp(-1j * wave.wavenumber * r) / (4.0 * np.pi * r)
        out[hit] = 0.0
        return out

    n_dof, n_el, n_loc = disc.n_dof, disc.n_elements, disc.n_loc
    z_all = disc.quad_points.reshape(-1, 3)
    w_all = disc.quad_weights.reshape(-1)
    kw = kern_block(np.arange(n_dof), z_all) * w_all[None, :]
    a = np.empty((n_dof, n_dof), dtype=np.complex128)
    for e in range(n_el):
        sl = slice(e * disc.n_quad, (e + 1) * disc.n_quad)
        a[:, e * n_loc : (e + 1) * n_loc] = kw[:, sl] @ disc.basis_at_quad

    own, near = _correction_pairs(disc)
    p = disc.degree
    nodes = disc.nodes_1d
    p1 = p + 1

    # jobs per source element: (row, apex_u, apex_v, delta)
    jobs = {e: [] for e in range(n_el)}
    same_patch = {e: [] for e in range(n_el)}  # deferred delta evaluation
    cross_patch = {e: [] for e in range(n_el)}
    for i in range(n_dof):
        e = own[i]
        loc = i - e * n_loc
        u_i, v_i = nodes[loc // p1], nodes[loc % p1]
        jobs[e].append((i, u_i, v_i, 0.0))
        ip_own, rect_own = disc.elements[e]
        for e2 in np.nonzero(near[i])[0]:
            ip2, (s0, s1, t0, t1) = disc.elements[e2]
            if ip2 == ip_own:
                su = rect_own[0] + u_i * (rect_own[1] - rect_own[0])
                tv = rect_own[2] + v_i * (rect_own[3] - rect_own[2])
                same_patch[e2].append(
                    (
                        i,
                        min(max((su - s0) / (s1 - s0), 0.0), 1.0),
                        min(max((tv - t0) / (t1 - t0), 0.0), 1.0),
                    )
                )
            else:
                cross_patch[e2].append(i)

    for e2 in range(n_el):
        if same_patch[e2]:
            rows_e = np.array([j[0] for j in same_patch[e2]])
            apex = np.array([[j[1], j[2]] for j in same_patch[e2]])
            pts, _ = disc.element_scattered(e2, apex)
            dist = np.linalg.norm(disc.colloc_points[rows_e] - pts, axis=1)
            deltas = dist / (2.0 * disc.elem_radii[e2])
            jobs[e2] += [
                (int(i), u, v, max(float(d), 1e-6))
                for (i, u, v), d in zip(same_patch[e2], deltas)
            ]
        if cross_patch[e2]:
            rows_e = np.array(cross_patch[e2])
            u, v, dist = _closest_params_batch(disc, e2, disc.colloc_points[rows_e])
            deltas = dist / (2.0 * disc.elem_radii[e2])
            jobs[e2] += [
                (int(i), float(uu), float(vv), max(float(d), 1e-6))
                for i, uu, vv, d in zip(rows_e, u, v, deltas)
            ]

    use_fused = HAVE_NUMBA
    grid = disc.surface.grid
    for e2 in range(n_el):
        if not jobs[e2]:
            continue
        elem_jobs = sorted(jobs[e2])
        locs = []
        wts = []
        starts = []
        row_of_point = []
        seg_of_point = []
        offset = 0
        for seg, (i, u0, v0, delta) in enumerate(elem_jobs):
            local, lw = _duffy_triangles(u0, v0, _rule_points(p, delta), delta)
            locs.append(local)
            wts.append(lw)
            starts.append(offset)
            offset += len(lw)
            row_of_point.append(np.full(len(lw), i))
            seg_of_point.append(np.full(len(lw), seg))
        locs = np.vstack(locs)
        wts = np.concatenate(wts)
        row_of_point = np.concatenate(row_of_point)
        rows_arr = np.array([j[0] for j in elem_jobs])
        ip2, (s0, s1, t0, t1) = disc.elements[e2]
        if use_fused:
            contrib = np.zeros((len(elem_jobs), n_loc), dtype=np.complex128)
            correction_contributions(
                grid.nodes,
                grid.weights,
                disc._dmat,
                disc.surface.nodal[ip2],
                s0,
                s1 - s0,
                t0,
                t1 - t0,
                locs,
                wts,
                np.concatenate(seg_of_point),
                disc.colloc_points[row_of_point],
                disc.colloc_normals[row_of_point],
                wave.wavenumber,
                wave.coupling,
                kernel == "cfie",
                disc.nodes_1d,
                disc.weights_1d,
                contrib,
            )
        else:
            pts, har = disc.element_scattered(e2, locs)
            bas = disc.basis_at(locs[:, 0], locs[:, 1])
            kv = _kernel_pointwise(disc, wave, row_of_point, pts, kernel) * (wts * har)
            contrib = np.add.reduceat(kv[:, None] * bas, starts, axis=0)
        sl = slice(e2 * disc.n_quad, (e2 + 1) * disc.n_quad)
        cols = slice(e2 * n_loc, (e2 + 1) * n_loc)
        a[rows_arr, cols] += contrib - kw[rows_arr, sl] @ disc.basis_at_quad
    return a


def cfie_identity_matrix(disc) -> np.ndarray:
    """The (1/2) I block: interpolatory collocation makes it diagonal."""
    return 0.5 * np.eye(disc.n_dof, dtype=np.complex128)


def assemble_cfie(disc: BoundaryDiscretization, wave: WaveSetup, quad_order: int | None = None):
    """Dense CFIE system (1/2) I + K* - i*eta*V in the element basis."""
    if quad_order is not None and quad_order != disc.quad_order:
        disc = BoundaryDiscretization(disc.surface, disc.degree, quad_order)
    return cfie_identity_matrix(disc) + _assemble_collocation(disc, wave, "cfie")


def assemble_single_layer(disc: BoundaryDiscretization, wave: WaveSetup):
    """Single-layer collocation matrix V alone (diagnostics and tests)."""
    return _assemble_collocation(disc, wave, "single")


def rhs_incident(disc: BoundaryDiscretization, wave: WaveSetup) -> np.ndarray:
    """Right side <grad u_inc, n> - i*eta*u_inc at the collocation points."""
    u = incident_wave(wave, disc.colloc_points)
    grad = incident_gradient(wave, disc.colloc_points)
    return np.einsum("ic,ic->i", grad, disc.colloc_normals.astype(complex)) - 1j * wave.coupling * u


def solve_density(matrix: np.ndarray, rhs: np.ndarray, wave: WaveSetup, tol: float = 1e-10,
                  method: str = "direct") -> NeumannTrace:
    """Solve the dense collocation system and report the relative residual."""
    matrix = np.ascontiguousarray(matrix, dtype=np.complex128)
    rhs = np.asarray(rhs, dtype=np.complex128)
    if matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != rhs.shape[0]:
        raise ValueError("system must be square and conforming")
    if method == "direct":
        lu, piv = sla.lu_factor(matrix)
        anorm = np.linalg.norm(matrix, 1)
        rcond = sla.lapack.zgecon(lu, anorm)[0]
        if rcond > 0 and 1.0 / rcond > 1e14:
            raise np.linalg.LinAlgError(f"system too ill-conditioned: cond ~ {1/rcond:.2e}")
        x = sla.lu_solve((lu, piv), rhs)
    elif method == "iterative":
        from scipy.sparse.linalg import gmres

        x, info = gmres(matrix, rhs, rtol=tol, restart=100, maxiter=2000)
        if info != 0:
            raise RuntimeError(f"gmres failed to converge (info={info})")
    else:
        raise ValueError(f"unknown solve method {method!r}")
    nb = np.linalg.norm(rhs)
    residual = float(np.linalg.norm(matrix @ x - rhs) / nb) if nb > 0 else 0.0
    if residual > tol:
        raise RuntimeError(f"solver residual {residual:.2e} above tolerance {tol:.2e}")
    return NeumannTrace(x, wave, residual)


def solve_scattering(disc: BoundaryDiscretization, wave: WaveSetup) -> NeumannTrace:
    """Assemble and solve the CFIE for one realization."""
    return solve_density(assemble_cfie(disc, wave), rhs_incident(disc, wave), wave)


def _density_and_sources(disc, trace):
    dens = disc.density_at_quad(trace.coefficients).reshape(-1)
    z = disc.quad_points.reshape(-1, 3)
    w = disc.quad_weights.reshape(-1)
    return dens * w, z


def eval_scattered(disc: BoundaryDiscretization, trace: NeumannTrace, x) -> np.ndarray:
    """Scattered wave at exterior points via the single-layer representation.

    With the CFIE solved for the outward Neumann trace of the total wave, the
    radiating field is u_s(x) = -int_S Phi(x, z) du/dn(z) dsigma; the minus
    sign follows from Green's identity with the sound-soft condition.
    """
    xp = np.atleast_2d(np.asarray(x, dtype=float))
    dw, z = _density_and_sources(disc, trace)
    phi = fundamental_solution(trace.wave.wavenumber, xp[:, None, :], z[None, :, :])
    out = -(phi @ dw)
    return out[0] if np.asarray(x).ndim == 1 else out


def eval_scattered_gradient(disc: BoundaryDiscretization, trace: NeumannTrace, x) -> np.ndarray:
    """Gradient of the scattered wave at exterior points, shape (n, 3)."""
    xp = np.atleast_2d(np.asarray(x, dtype=float))
    dw, z = _density_and_sources(disc, trace)
    grad = fundamental_gradient_x(trace.wave.wavenumber, xp[:, None, :], z[None, :, :])
    out = -np.einsum("xzc,z->xc", grad, dw)
    return out[0] if np.asarray(x).ndim == 1 else out


def eval_scattered_with_gradient(disc: BoundaryDiscretization, trace: NeumannTrace, x):
    """Field and gradient at exterior points in one pass over the sources."""
    xp = np.atleast_2d(np.asarray(x, dtype=float))
    dw, z = _density_and_sources(disc, trace)
    kappa = trace.wave.wavenumber
    n_x = len(xp)
    u = np.empty(n_x, dtype=np.complex128)
    grad = np.empty((n_x, 3), dtype=np.complex128)
    for lo in range(0, n_x, 512):
        hi = min(lo + 512, n_x)
        diff = xp[lo:hi, None, :] - z[None, :, :]
        r = np.linalg.norm(diff, axis=2)
        phi = np.exp(-1j * kappa * r) / (4.0 * np.pi * r)
        u[lo:hi] = -(phi @ dw)
        radial = phi * (-1j * kappa - 1.0 / r) / r * dw[None, :]
        grad[lo:hi] = -np.einsum("xz,xzc->xc", radial, diff)
    return u, grad

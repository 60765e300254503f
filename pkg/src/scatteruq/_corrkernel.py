"""Fused evaluation of peak-centered correction rules (numba).

For every rule point this computes the surface point, tangents, area
element, CFIE kernel, and element basis values in one pass, accumulating
per-job basis-weighted sums.  Falls back to the vectorized numpy path in
bem.py when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is expected in production
    HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def _bary_row(nodes, weights, s, out):
    n = len(nodes)
    hit = -1
    for i in range(n):
        if abs(s - nodes[i]) < 1e-14:
            hit = i
            break
    if hit >= 0:
        for i in range(n):
            out[i] = 0.0
        out[hit] = 1.0
        return
    total = 0.0
    for i in range(n):
        out[i] = weights[i] / (s - nodes[i])
        total += out[i]
    inv = 1.0 / total
    for i in range(n):
        out[i] *= inv


@njit(cache=True)
def correction_contributions(
    grid_nodes,
    grid_weights,
    dmat,
    nodal,  # (nq, nq, 3)
    s0,
    ds,
    t0,
    dt,
    rule_uv,  # (K, 2) element-local
    rule_w,  # (K,)
    seg_of_point,  # (K,) job index per point
    x_rows,  # (K, 3) collocation point per rule point
    n_rows,  # (K, 3) collocation normal per rule point
    kappa,
    eta,
    cfie,  # bool: adjoint-double-layer minus i*eta*single vs single layer
    basis_nodes,
    basis_weights,
    out,  # (n_jobs, nloc) complex
):
    nq = len(grid_nodes)
    np1 = len(basis_nodes)
    es = np.empty(nq)
    et = np.empty(nq)
    esd = np.empty(nq)
    etd = np.empty(nq)
    eu = np.empty(np1)
    ev = np.empty(np1)
    tmp = np.empty((nq, 3))
    tmpd = np.empty((nq, 3))
    scale = ds * dt
    for k in range(len(rule_w)):
        u = rule_uv[k, 0]
        v = rule_uv[k, 1]
        _bary_row(grid_nodes, grid_weights, s0 + u * ds, es)
        _bary_row(grid_nodes, grid_weights, t0 + v * dt, et)
        for i in range(nq):
            accs = 0.0
            acct = 0.0
            for j in range(nq):
                accs += es[j] * dmat[j, i]
                acct += et[j] * dmat[j, i]
            esd[i] = accs
            etd[i] = acct
        # contract the s-direction: values and s-derivatives at the t-nodes
        for j in range(nq):
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            b0 = 0.0
            b1 = 0.0
            b2 = 0.0
            for i in range(nq):
                w = es[i]
                wd = esd[i]
                a0 += w * nodal[i, j, 0]
                a1 += w * nodal[i, j, 1]
                a2 += w * nodal[i, j, 2]
                b0 += wd * nodal[i, j, 0]
                b1 += wd * nodal[i, j, 1]
                b2 += wd * nodal[i, j, 2]
            tmp[j, 0] = a0
            tmp[j, 1] = a1
            tmp[j, 2] = a2
            tmpd[j, 0] = b0
            tmpd[j, 1] = b1
            tmpd[j, 2] = b2
        px = py = pz = 0.0
        tsx = tsy = tsz = 0.0
        ttx = tty = ttz = 0.0
        for j in range(nq):
            w = et[j]
            wd = etd[j]
            px += w * tmp[j, 0]
            py += w * tmp[j, 1]
            pz += w * tmp[j, 2]
            tsx += w * tmpd[j, 0]
            tsy += w * tmpd[j, 1]
            tsz += w * tmpd[j, 2]
            ttx += wd * tmp[j, 0]
            tty += wd * tmp[j, 1]
            ttz += wd * tmp[j, 2]
        cx = tsy * ttz - tsz * tty
        cy = tsz * ttx - tsx * ttz
        cz = tsx * tty - tsy * ttx
        area = np.sqrt(cx * cx + cy * cy + cz * cz) * scale
        dx = x_rows[k, 0] - px
        dy = x_rows[k, 1] - py
        dz = x_rows[k, 2] - pz
        r = np.sqrt(dx * dx + dy * dy + dz * dz)
        if r < 1e-14:
            continue
        phase = -kappa * r
        phi = complex(np.cos(phase), np.sin(phase)) / (4.0 * np.pi * r)
        if cfie:
            dot = dx * n_rows[k, 0] + dy * n_rows[k, 1] + dz * n_rows[k, 2]
            kern = phi * (complex(0.0, -kappa) - 1.0 / r) * (dot / r) - complex(0.0, eta) * phi
        else:
            kern = phi
        factor = kern * (rule_w[k] * area)
        _bary_row(basis_nodes, basis_weights, u, eu)
        _bary_row(basis_nodes, basis_weights, v, ev)
        seg = seg_of_point[k]
        for a in range(np1):
            fa = factor * eu[a]
            for b in range(np1):
                out[seg, a * np1 + b] += fa * ev[b]

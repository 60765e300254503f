"""Plain-text multipatch geometry files.

Layout (whitespace separated, ``#`` starts a comment):

    patches M
    degrees p1 p2
    knots_u k0 k1 ...
    knots_v k0 k1 ...
    x y z w            # rows*cols control lines, row-major
    ...
    adjacency          # optional block of 5-tuples
    i e j f o
"""

from __future__ import annotations

import numpy as np

from .nurbs import PatchMap
from .surfaces import MultiPatchSurface, compute_adjacency


def _tokens(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line.split()


def load_surface(path: str, orientations=None) -> MultiPatchSurface:
    """Read a multipatch surface; ``orientations`` declares per-patch outward
    signs (+1/-1), defaulting to +1.  Adjacency is recomputed when the file
    omits the block."""
    lines = list(_tokens(path))
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise ValueError(f"{path}: unexpected end of file")
        pos += 1
        return lines[pos - 1]

    head = take()
    if head[0] != "patches" or len(head) != 2:
        raise ValueError(f"{path}: expected 'patches M' header")
    n_patches = int(head[1])
    patches = []
    for _ in range(n_patches):
        deg = take()
        if deg[0] != "degrees" or len(deg) != 3:
            raise ValueError(f"{path}: expected 'degrees p1 p2'")
        p1, p2 = int(deg[1]), int(deg[2])
        ku = take()
        kv = take()
        if ku[0] != "knots_u" or kv[0] != "knots_v":
            raise ValueError(f"{path}: expected knot vectors")
        knots_u = np.array([float(x) for x in ku[1:]])
        knots_v = np.array([float(x) for x in kv[1:]])
        rows = len(knots_u) - p1 - 1
        cols = len(knots_v) - p2 - 1
        ctrl = np.empty((rows, cols, 3))
        wts = np.empty((rows, cols))
        for i in range(rows):
            for j in range(cols):
                vals = [float(x) for x in take()]
                if len(vals) != 4:
                    raise ValueError(f"{path}: control lines need 'x y z w'")
                ctrl[i, j] = vals[:3]
                wts[i, j] = vals[3]
        patches.append(PatchMap((p1, p2), knots_u, knots_v, ctrl, wts))

    adjacency = None
    if pos < len(lines) and lines[pos][0] == "adjacency":
        pos += 1
        adjacency = []
        while pos < len(lines):
            vals = [int(x) for x in take()]
            adjacency.append(tuple(vals))
    if adjacency is None:
        adjacency = compute_adjacency(patches)
    if orientations is None:
        orientations = np.ones(n_patches)
    return MultiPatchSurface(patches, adjacency, np.asarray(orientations, dtype=float))


def save_surface(path: str, surface: MultiPatchSurface) -> None:
    """Write a surface in the plain-text multipatch format."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"patches {surface.n_patches}\n")
        for patch in surface.patches:
            fh.write(f"degrees {patch.degrees[0]} {patch.degrees[1]}\n")
            fh.write("knots_u " + " ".join(repr(float(k)) for k in patch.knots_u) + "\n")
            fh.write("knots_v " + " ".join(repr(float(k)) for k in patch.knots_v) + "\n")
            rows, cols = patch.weights.shape
            for i in range(rows):
                for j in range(cols):
                    x, y, z = (float(c) for c in patch.control[i, j])
                    fh.write(f"{x!r} {y!r} {z!r} {float(patch.weights[i, j])!r}\n")
        fh.write("adjacency\n")
        for tup in surface.adjacency:
            fh.write(" ".join(str(int(v)) for v in tup) + "\n")

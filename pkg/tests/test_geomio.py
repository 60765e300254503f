import numpy as np
import pytest

from scatteruq.geomio import load_surface, save_surface
from scatteruq.surfaces import build_landmarks, reference_surface, surface_area


def test_torus_roundtrip(tmp_path, torus):
    path = tmp_path / "torus.txt"
    save_surface(path, torus)
    loaded = load_surface(path, orientations=torus.orientation)
    assert loaded.n_patches == torus.n_patches
    s = np.linspace(0, 1, 7)
    for ip in (0, 5, 13):
        np.testing.assert_allclose(
            loaded.patches[ip].eval_grid(s, s), torus.patches[ip].eval_grid(s, s), atol=1e-15
        )
    assert sorted(loaded.adjacency) == sorted(torus.adjacency)


def test_loaded_surface_usable_downstream(tmp_path, torus):
    path = tmp_path / "torus.txt"
    save_surface(path, torus)
    loaded = load_surface(path, orientations=torus.orientation)
    surf = reference_surface(build_landmarks(loaded, 8))
    exact = 4 * np.pi**2 * 0.75 * 0.25
    assert abs(surface_area(surf, 8) - exact) < 1e-6


def test_comments_and_whitespace(tmp_path, cuboid):
    path = tmp_path / "cuboid.txt"
    save_surface(path, cuboid)
    text = path.read_text()
    decorated = "# cuboid geometry\n\n" + text.replace("degrees 1 1", "  degrees 1 1  # p1 p2")
    path.write_text(decorated)
    loaded = load_surface(path)
    assert loaded.n_patches == 24


def test_adjacency_recomputed_when_missing(tmp_path, cuboid):
    path = tmp_path / "cuboid.txt"
    save_surface(path, cuboid)
    text = path.read_text()
    head = text[: text.index("adjacency")]
    path.write_text(head)
    loaded = load_surface(path)
    assert sorted(loaded.adjacency) == sorted(cuboid.adjacency)


def test_truncated_file_rejected(tmp_path, cuboid):
    path = tmp_path / "bad.txt"
    save_surface(path, cuboid)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:10]))
    with pytest.raises(ValueError):
        load_surface(path)


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("npatches 3\n")
    with pytest.raises(ValueError):
        load_surface(path)

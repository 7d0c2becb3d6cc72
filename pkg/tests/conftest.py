import numpy as np
import pytest
from scipy.spatial import Delaunay

from sectkit.shapes import TriMesh


def random_mesh(rng, n_max=30, dim=2):
    """A random closed complex: a Delaunay patch with some triangles and edges
    removed, plus a few isolated vertices."""
    n = int(rng.integers(4, n_max + 1))
    pts = rng.uniform(-1, 1, size=(n, dim)) / np.sqrt(dim)
    tri = Delaunay(pts[:, :2]).simplices
    keep = rng.random(len(tri)) < 0.7
    tris = np.sort(tri[keep], axis=1)
    mesh = TriMesh.from_triangles(pts, tris)
    # add a few free edges between vertices that share no triangle
    edges = {tuple(e) for e in mesh.simplices[1].tolist()}
    for _ in range(int(rng.integers(0, 4))):
        a, b = sorted(rng.choice(n, 2, replace=False).tolist())
        edges.add((a, b))
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return TriMesh(pts, (np.arange(n).reshape(-1, 1), edges, tris))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance outcomes, criterion number -> list of (check name, passed, detail)
ACCEPTANCE: dict[int, list] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[k]
        ok = all(passed for _, passed, _ in checks)
        detail = "; ".join(f"{name}: {'ok' if passed else 'FAIL'} ({info})" for name, passed, info in checks)
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")

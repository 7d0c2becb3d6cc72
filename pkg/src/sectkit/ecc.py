"""Direction grids and Euler characteristic curves of sublevel filtrations.

For a direction ``nu`` and a shape inside ``B(0, R)``, a point ``x`` is in the
sublevel set at level ``t`` iff ``x . nu + R <= t``, for ``t`` in ``[0, T]``,
``T = 2R``.  On a simplicial complex every simplex enters at the largest
height of its vertices, so the curve is an exact integer step function that
only changes at vertex heights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _arcs, _nerve
from ._raster import RasterCover
from .errors import ContainmentError, GridMismatchError, ParseError, ResourceError, ValidationError
from .shapes import BallUnion, ShapeSpec, TriMesh

UNIT_TOL = 1e-12
FILE_UNIT_TOL = 1e-6
DEFAULT_MAX_DIM = 16


@dataclass(frozen=True)
class DirectionGrid:
    directions: np.ndarray

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if len(dirs) < 1:
            raise ValidationError("a direction grid needs at least one direction")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1) > UNIT_TOL):
            raise ValidationError("directions must be unit vectors")
        dirs.setflags(write=False)
        object.__setattr__(self, "directions", dirs)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return len(self.directions)

    def __eq__(self, other):
        return (isinstance(other, DirectionGrid) and self.directions.shape == other.directions.shape
                and bool(np.all(self.directions == other.directions)))

    def __hash__(self):
        return hash(self.directions.tobytes())


def direction_grid(dim: int, count: int | None = None, source: str = "uniform_circle",
                   path=None) -> DirectionGrid:
    """Build a direction grid.

    ``uniform_circle`` gives ``(cos theta_p, sin theta_p)``,
    ``theta_p = (p - 1) 2 pi / count``.  ``file`` reads a headerless CSV with
    one direction per row; rows within ``1e-6`` of unit length are normalised,
    anything further off is rejected.
    """
    if source == "uniform_circle":
        if dim != 2:
            raise ValidationError("uniform_circle directions exist only for dim=2; use a file")
        if count is None or count < 1:
            raise ValidationError(f"direction count must be >= 1, got {count}")
        theta = np.arange(count) * (2 * math.pi / count)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        # snap exact quarter turns so (1,0),(0,1),... come out exact
        dirs[np.abs(dirs) < 1e-15] = 0.0
        return DirectionGrid(dirs / np.linalg.norm(dirs, axis=1, keepdims=True))
    if source == "file":
        dirs = read_directions(path)
        if dirs.shape[1] != dim:
            raise ValidationError(f"{path}: expected {dim} columns, found {dirs.shape[1]}")
        if count is not None and len(dirs) != count:
            raise ValidationError(f"{path}: expected {count} directions, found {len(dirs)}")
        return DirectionGrid(dirs)
    raise ValidationError(f"unknown direction source {source!r}")


def read_directions(path) -> np.ndarray:
    try:
        rows = [line.strip() for line in Path(path).read_text().splitlines()]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        dirs = np.array([[float(x) for x in row.split(",")] for row in rows if row], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric direction entry") from exc
    if dirs.ndim != 2 or len(dirs) == 0:
        raise ParseError(f"{path}: no directions found")
    norms = np.linalg.norm(dirs, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1) > FILE_UNIT_TOL)
    if len(bad):
        raise ValidationError(f"{path}: row {bad[0] + 1} has norm {norms[bad[0]]:.9g}, not a unit vector")
    return dirs / norms[:, None]


def write_directions(path, grid: DirectionGrid) -> None:
    lines = [",".join(repr(float(x)) for x in row) for row in grid.directions]
    Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class ECCurve:
    """Right-continuous integer step function on ``[0, T]``.

    The value is 0 before ``breakpoints[0]`` and ``values[k]`` on
    ``[breakpoints[k], breakpoints[k + 1])``.
    """

    T: float
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=np.int64)
        if b.shape != v.shape or b.ndim != 1:
            raise ValidationError("breakpoints and values must be equal-length vectors")
        if len(b) and (b[0] < 0 or b[-1] > self.T):
            raise ValidationError("breakpoints must lie in [0, T]")
        if np.any(np.diff(b) <= 0):
            raise ValidationError("breakpoints must be strictly increasing")
        prev = np.concatenate([[0], v[:-1]])
        if np.any(v == prev):
            raise ValidationError("consecutive values must differ")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_jumps(cls, T: float, times, jumps) -> "ECCurve":
        """Compress signed jumps at arbitrary times; ``inf`` times are dropped."""
        times = np.asarray(times, dtype=float)
        jumps = np.asarray(jumps, dtype=np.int64)
        keep = np.isfinite(times) & (jumps != 0)
        times, jumps = times[keep], jumps[keep]
        if len(times) == 0:
            return cls(T, np.empty(0), np.empty(0, np.int64))
        uniq, inv = np.unique(times, return_inverse=True)
        net = np.zeros(len(uniq), np.int64)
        np.add.at(net, inv, jumps)
        vals = np.cumsum(net)
        prev = np.concatenate([[0], vals[:-1]])
        changed = vals != prev
        return cls(T, uniq[changed], vals[changed])

    @classmethod
    def constant(cls, T: float, value: int) -> "ECCurve":
        if value == 0:
            return cls(T, np.empty(0), np.empty(0, np.int64))
        return cls(T, np.array([0.0]), np.array([value]))

    def __call__(self, t):
        """Evaluate at ``t`` (scalar or array), right-continuously."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        padded = np.concatenate([self.values, [0]])
        return padded[idx]  # idx == -1 picks the trailing 0

    def __add__(self, other: "ECCurve") -> "ECCurve":
        _same_horizon(self, other)
        times = np.concatenate([self.breakpoints, other.breakpoints])
        jumps = np.concatenate([np.diff(self.values, prepend=0), np.diff(other.values, prepend=0)])
        return ECCurve.from_jumps(self.T, times, jumps)

    def __eq__(self, other):
        return (isinstance(other, ECCurve) and self.T == other.T
                and np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values))

    def pieces(self):
        """Interval edges ``[0, b_0, ..., b_K, T]`` and the constant value on each piece."""
        edges = np.concatenate([[0.0], self.breakpoints, [self.T]])
        vals = np.concatenate([[0], self.values])
        return edges, vals

    def sup_abs(self) -> int:
        return int(np.max(np.abs(self.values))) if len(self.values) else 0

    def terminal(self) -> int:
        return int(self(self.T))


def _same_horizon(a: ECCurve, b: ECCurve):
    if a.T != b.T:
        raise GridMismatchError(f"curve horizons differ: {a.T} vs {b.T}")


def ecc_bounds_check(curve: ECCurve, M: float) -> bool:
    """True iff ``sup_t |chi_t| <= M``."""
    if not M > 0:
        raise ValidationError("M must be positive")
    return curve.sup_abs() <= M


# --------------------------------------------------------------------------- #
# Meshes

def _vertex_heights(points, directions, R, tol=1e-9, strict=True):
    h = np.atleast_2d(directions) @ points.T + R
    T = 2 * R
    if strict and (h.min() < -tol or h.max() > T + tol):
        raise ContainmentError(f"vertex height outside [0, {T:.6g}]; shape is not inside B(0, {R:.6g})")
    return np.clip(h, 0.0, T) if strict else h


def ecc_mesh(mesh: TriMesh, nu, R: float) -> ECCurve:
    """Exact ECC of a simplicial complex under the height filtration."""
    return ecc_mesh_many(mesh, np.atleast_2d(nu), R)[0]


def ecc_mesh_many(mesh: TriMesh, directions, R: float) -> list[ECCurve]:
    h = _vertex_heights(mesh.vertices, directions, R)
    curves = []
    for hg in h:
        times, jumps = [], []
        for k, cells in enumerate(mesh.simplices):
            if len(cells) == 0:
                continue
            times.append(hg[cells].max(axis=1))
            jumps.append(np.full(len(cells), (-1) ** k, np.int64))
        curves.append(ECCurve.from_jumps(2 * R, np.concatenate(times), np.concatenate(jumps)))
    return curves


# --------------------------------------------------------------------------- #
# Ball unions

def _ball_entry(centers, directions, R):
    """Entry heights of ball centers: ``max(h, 0)``; centers above ``T`` never enter."""
    h = np.atleast_2d(directions) @ centers.T + R
    T = 2 * R
    h = np.maximum(h, 0.0)
    h[h > T] = np.inf
    return h


class CechNerve:
    """Čech nerve of a ball union, enumerated once per call over all directions."""

    def __init__(self, balls: BallUnion, max_dim: int = DEFAULT_MAX_DIM):
        self.balls = balls
        self.max_dim = int(max_dim)
        self.indptr, self.indices = _nerve.neighbour_graph(balls.centers, balls.radius)

    def jumps(self, heights: np.ndarray):
        heights = np.ascontiguousarray(np.atleast_2d(heights), dtype=float)
        jumps, counts, overflow = _nerve.nerve_jumps(
            self.balls.centers, self.balls.radius, self.indptr, self.indices, heights, self.max_dim)
        if overflow:
            raise ResourceError(
                f"Čech nerve has simplices of dimension > {self.max_dim}; raise max_dim or use the "
                "'arcs' or 'raster' backend")
        self.simplex_counts = counts
        return jumps

    def curves(self, directions, R: float) -> list[ECCurve]:
        h = _ball_entry(self.balls.centers, directions, R)
        jumps = self.jumps(h)
        return [ECCurve.from_jumps(2 * R, hg, jg) for hg, jg in zip(h, jumps)]


class BoundaryArcs:
    """Planar ball union prepared for the boundary-arc Euler characteristic."""

    def __init__(self, balls: BallUnion):
        if balls.dim != 2:
            raise ValidationError("the arcs backend supports planar ball unions only")
        centers, inverse = np.unique(balls.centers, axis=0, return_inverse=True)
        self.centers = centers
        self.inverse = inverse.ravel()
        self.radius = balls.radius
        self.indptr, self.indices = _nerve.neighbour_graph(centers, balls.radius)
        self.phi, self.alpha = _arcs.arc_geometry(centers, balls.radius, self.indptr, self.indices)

    def curves(self, directions, R: float) -> list[ECCurve]:
        h = _ball_entry(self.centers, directions, R)
        out = []
        for hg in h:
            order = np.argsort(hg, kind="stable")
            order = order[np.isfinite(hg[order])]
            d2pi = _arcs.arc_jumps(self.indptr, self.indices, self.phi, self.alpha,
                                   np.ascontiguousarray(order))
            chi = np.cumsum(d2pi[: len(order)]) / (2 * math.pi)
            rounded = np.rint(chi)
            if len(chi) and np.max(np.abs(chi - rounded)) > 1e-6:
                raise ValidationError("boundary-arc Euler characteristic is not integral "
                                      "(degenerate circle arrangement)")
            jumps = np.diff(rounded.astype(np.int64), prepend=0)
            out.append(ECCurve.from_jumps(2 * R, hg[order], jumps))
        return out


def parse_backend(backend) -> tuple[str, float | None]:
    """``'cech_nerve' | 'cech' | 'arcs' | 'raster' | 'raster:<delta>' | ('raster', delta)``."""
    if isinstance(backend, tuple):
        name, delta = backend
        if delta is None:
            return parse_backend(name)
        if str(name) != "raster" or not float(delta) > 0:
            raise ValidationError(f"unknown ball-union backend {backend!r}")
        return "raster", float(delta)
    name = str(backend)
    if name in ("cech", "cech_nerve"):
        return "cech_nerve", None
    if name == "arcs":
        return "arcs", None
    if name.startswith("raster"):
        _, _, tail = name.partition(":")
        try:
            delta = float(tail) if tail else 0.005
        except ValueError:
            raise ValidationError(f"bad raster resolution in {backend!r}") from None
        if not delta > 0:
            raise ValidationError("raster resolution must be positive")
        return "raster", delta
    raise ValidationError(f"unknown ball-union backend {backend!r}")


def ecc_ball_union(shape: BallUnion, nu, R: float, backend="cech_nerve",
                   max_dim: int = DEFAULT_MAX_DIM) -> ECCurve:
    """ECC of a ball union in one direction.  See :func:`ecc_ball_union_many`."""
    return ecc_ball_union_many(shape, np.atleast_2d(nu), R, backend, max_dim)[0]


def ecc_ball_union_many(shape: BallUnion, directions, R: float, backend="cech_nerve",
                        max_dim: int = DEFAULT_MAX_DIM) -> list[ECCurve]:
    """ECCs of a ball union for several directions sharing one precomputation.

    Backends
    --------
    cech_nerve
        Alternating simplex count of the Čech nerve restricted to entered
        centers (exact for the ball union by the nerve theorem).
    arcs
        Same quantity from the boundary arcs of the union; planar only.
    raster(delta)
        Filled cubical complex of a ``delta`` pixel grid; an approximation.
    """
    name, delta = parse_backend(backend)
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if name == "cech_nerve":
        return CechNerve(shape, max_dim).curves(directions, R)
    if name == "arcs":
        return BoundaryArcs(shape).curves(directions, R)
    cover = RasterCover(shape.centers, shape.radius, delta)
    h = _ball_entry(shape.centers, directions, R)
    out = []
    for hg in h:
        times, signs = cover.cells(hg)
        out.append(ECCurve.from_jumps(2 * R, times, signs))
    return out


def shape_eccs(shape: ShapeSpec, directions, backend="arcs", max_dim: int = DEFAULT_MAX_DIM
               ) -> list[ECCurve]:
    """ECCs of any shape for each row of ``directions`` (``backend`` ignored for meshes)."""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if directions.shape[1] != shape.dim:
        raise GridMismatchError(f"direction dimension {directions.shape[1]} != shape dimension {shape.dim}")
    R = shape.bounding_radius
    if isinstance(shape.geometry, TriMesh):
        return ecc_mesh_many(shape.geometry, directions, R)
    return ecc_ball_union_many(shape.geometry, directions, R, backend, max_dim)


def brute_force_chi(mesh: TriMesh, nu, R: float, t: float) -> int:
    """Alternating count of simplices whose vertices all have height <= t."""
    h = np.asarray(mesh.vertices) @ np.asarray(nu, dtype=float) + R
    return int(sum((-1) ** k * int(np.sum(np.all(h[cells] <= t, axis=1)))
                   for k, cells in enumerate(mesh.simplices) if len(cells)))


def curves_equal(a: Sequence[ECCurve], b: Sequence[ECCurve]) -> bool:
    return len(a) == len(b) and all(x == y for x, y in zip(a, b))

"""Shapes: triangle meshes, unions of equal-radius balls, and the simulation families.

Two representations are supported.  A :class:`TriMesh` is a closed simplicial
complex in R^2 or R^3; a :class:`BallUnion` is a finite set of centers sharing
one radius.  :class:`ShapeSpec` wraps either together with the radius ``R`` of
a closed origin-centred ball assumed to contain the shape.

The two-arc shapes used throughout the simulations are built from centers
placed at equal parameter steps ``t_j = a + (j / J) (b - a)`` for
``j = 1..J`` along each arc, tube radius 1/5, ``R = 3/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ContainmentError, ParseError, ValidationError

TUBE_RADIUS = 0.2
FAMILY_R = 1.5
ARC_OFFSET = 0.4

# Parametric ranges (radians) of the two arcs.
_SECOND_ARC = (6 * math.pi / 5, 14 * math.pi / 5)


@dataclass(frozen=True)
class TriMesh:
    """A closed simplicial complex with vertices in R^d.

    ``simplices[k]`` is an ``(m_k, k + 1)`` integer array of k-simplices, each
    row sorted ascending.  ``simplices[0]`` lists every vertex.
    """

    vertices: np.ndarray
    simplices: tuple[np.ndarray, ...]

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] not in (2, 3):
            raise ValidationError(f"vertices must be (n, 2) or (n, 3), got {verts.shape}")
        object.__setattr__(self, "vertices", verts)
        cells = tuple(np.sort(np.asarray(s, dtype=np.int64).reshape(len(s), k + 1), axis=1)
                      for k, s in enumerate(self.simplices))
        object.__setattr__(self, "simplices", cells)
        self._validate()

    def _validate(self):
        n = len(self.vertices)
        d_mesh = len(self.simplices) - 1
        if d_mesh > self.dim:
            raise ValidationError(f"mesh dimension {d_mesh} exceeds ambient dimension {self.dim}")
        for k, cells in enumerate(self.simplices):
            if cells.size == 0:
                continue
            if cells.min() < 0 or cells.max() >= n:
                raise ValidationError(f"{k}-simplex references a vertex outside 0..{n - 1}")
            if k > 0 and np.any(cells[:, 1:] == cells[:, :-1]):
                raise ValidationError(f"degenerate {k}-simplex with repeated vertex")
        # closure: every facet of a listed k-simplex must itself be listed
        for k in range(1, len(self.simplices)):
            have = {tuple(row) for row in self.simplices[k - 1].tolist()}
            for row in self.simplices[k].tolist():
                for face in combinations(row, k):
                    if face not in have:
                        raise ValidationError(f"face {face} of {k}-simplex {tuple(row)} is missing")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def counts(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.simplices)

    def euler_characteristic(self) -> int:
        return int(sum((-1) ** k * len(s) for k, s in enumerate(self.simplices)))

    @classmethod
    def from_triangles(cls, vertices, triangles) -> "TriMesh":
        """Build the closed complex spanned by a triangle list."""
        vertices = np.asarray(vertices, dtype=float)
        tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        n = len(vertices)
        if tris.size and (tris.min() < 0 or tris.max() >= n):
            raise ValidationError(f"face references a vertex outside 0..{n - 1}")
        tris = np.sort(tris, axis=1)
        if np.any(tris[:, 1:] == tris[:, :-1]):
            raise ValidationError("degenerate face with repeated vertex")
        tris = np.unique(tris, axis=0)
        edges = np.concatenate([tris[:, [0, 1]], tris[:, [0, 2]], tris[:, [1, 2]]])
        edges = np.unique(edges, axis=0) if len(edges) else np.empty((0, 2), np.int64)
        verts0 = np.arange(n, dtype=np.int64).reshape(-1, 1)
        return cls(vertices, (verts0, edges, tris))


@dataclass(frozen=True)
class BallUnion:
    """Union of closed balls of a common radius around ``centers``."""

    centers: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        if c.ndim != 2 or len(c) == 0:
            raise ValidationError("centers must be a non-empty (n, d) array")
        if not self.radius > 0:
            raise ValidationError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


Geometry = Union[TriMesh, BallUnion]


@dataclass(frozen=True)
class ShapeSpec:
    """A shape together with a bounding radius ``R``; the filtration horizon is ``2R``.

    Meshes must lie in the closed ball of radius ``R``.  Ball unions are only
    required to have their centers there: the sublevel filtration of a ball
    union is driven by its centers, and the reference two-arc shapes reach
    ``1.544 > 3/2`` once the tube radius is added.
    """

    geometry: Geometry
    bounding_radius: float
    tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        if not self.bounding_radius > 0:
            raise ValidationError("bounding_radius must be positive")
        pts = self.points
        worst = float(np.max(np.linalg.norm(pts, axis=1)))
        if isinstance(self.geometry, TriMesh) and worst > self.bounding_radius + self.tol:
            raise ContainmentError(
                f"vertex at distance {worst:.6g} lies outside B(0, {self.bounding_radius:.6g})")

    @property
    def points(self) -> np.ndarray:
        g = self.geometry
        return g.vertices if isinstance(g, TriMesh) else g.centers

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def T(self) -> float:
        return 2.0 * self.bounding_radius

    def max_extent(self) -> float:
        """Largest ``||x|| (+ r)`` over the shape's points."""
        extra = self.geometry.radius if isinstance(self.geometry, BallUnion) else 0.0
        return float(np.max(np.linalg.norm(self.points, axis=1))) + extra


@dataclass(frozen=True)
class FamilyParams:
    """Parameters of the perturbed two-arc family.

    ``epsilon`` widens the first arc to ``[(1 - eps) pi/5, (9 + eps) pi/5]``.
    """

    epsilon: float = 0.0
    noise_sd: float = 0.05
    curve_points: int = 100
    tube_radius: float = TUBE_RADIUS

    def __post_init__(self):
        if not 0 <= self.epsilon:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.noise_sd > 0:
            raise ValidationError(f"noise_sd must be > 0, got {self.noise_sd}")
        if self.curve_points < 3:
            raise ValidationError(f"curve_points must be >= 3, got {self.curve_points}")


# --------------------------------------------------------------------------- #
# OFF reader

def _off_tokens(text: str):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line.split()


def load_mesh(path, format: str = "OFF", dim: int | None = None) -> ShapeSpec:
    """Read an ASCII OFF triangle mesh.

    Edges are derived from the faces.  The bounding radius is the largest
    vertex norm.  With ``dim=2`` the z coordinate must vanish and is dropped.

    Raises
    ------
    ParseError
        Malformed header, counts, or coordinates.
    ValidationError
        Out-of-range index, repeated index in a face, or a non-triangle face.
    """
    if format.upper() != "OFF":
        raise ValidationError(f"unsupported mesh format {format!r}")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    lines = list(_off_tokens(text))
    if not lines or lines[0][0] != "OFF":
        raise ParseError(f"{path}: missing OFF header")
    head = lines[0][1:] or (lines[1] if len(lines) > 1 else [])
    body = lines[1:] if lines[0][1:] else lines[2:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{path}: bad count line {head!r}") from exc
    if nv < 0 or nf < 0 or len(body) < nv + nf:
        raise ParseError(f"{path}: expected {nv} vertices and {nf} faces, found {len(body)} lines")
    try:
        verts = np.array([[float(x) for x in row[:3]] for row in body[:nv]], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: bad vertex coordinate") from exc
    if nv and verts.shape != (nv, 3):
        raise ParseError(f"{path}: vertices need three coordinates")
    faces = []
    for row in body[nv:nv + nf]:
        try:
            k = int(row[0])
            idx = [int(x) for x in row[1:1 + k]]
        except (IndexError, ValueError) as exc:
            raise ParseError(f"{path}: bad face line {row!r}") from exc
        if k != 3 or len(idx) != 3:
            raise ParseError(f"{path}: only triangle faces are supported, got {k}-gon")
        faces.append(idx)
    if dim == 2:
        if nv and np.max(np.abs(verts[:, 2])) > 0:
            raise ValidationError(f"{path}: dim=2 requested but z coordinates are non-zero")
        verts = verts[:, :2]
    mesh = TriMesh.from_triangles(verts, np.array(faces, dtype=np.int64).reshape(-1, 3))
    radius = float(np.max(np.linalg.norm(mesh.vertices, axis=1))) if nv else 0.0
    if radius == 0.0:
        raise ValidationError(f"{path}: mesh has zero extent")
    return ShapeSpec(mesh, radius)


def write_off(path, mesh: TriMesh) -> None:
    """Write the vertices and triangles of ``mesh`` as ASCII OFF."""
    verts = mesh.vertices
    if verts.shape[1] == 2:
        verts = np.column_stack([verts, np.zeros(len(verts))])
    tris = mesh.simplices[2] if len(mesh.simplices) > 2 else np.empty((0, 3), np.int64)
    lines = ["OFF", f"{len(verts)} {len(tris)} 0"]
    lines += [" ".join(repr(float(x)) for x in v) for v in verts]
    lines += ["3 " + " ".join(str(int(i)) for i in t) for t in tris]
    Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------- #
# Two-arc shapes

def arc_parameters(start: float, stop: float, J: int) -> np.ndarray:
    """``t_j = start + (j / J) (stop - start)`` for ``j = 1..J``."""
    j = np.arange(1, J + 1)
    return start + j / J * (stop - start)


def first_arc_range(epsilon: float) -> tuple[float, float]:
    return (1 - epsilon) * math.pi / 5, (9 + epsilon) * math.pi / 5


def _two_arc_centers(range1, J, a1=1.0, b1=1.0, a2=1.0, b2=1.0) -> np.ndarray:
    t1 = arc_parameters(*range1, J)
    t2 = arc_parameters(*_SECOND_ARC, J)
    arc1 = np.column_stack([ARC_OFFSET + a1 * np.cos(t1), b1 * np.sin(t1)])
    arc2 = np.column_stack([-ARC_OFFSET + a2 * np.cos(t2), b2 * np.sin(t2)])
    return np.vstack([arc1, arc2])


def make_deterministic_shape(which: str, J: int = 100) -> ShapeSpec:
    """The reference shapes ``K1`` (two open arcs) and ``K2`` (first arc closed)."""
    if J < 3:
        raise ValidationError(f"J must be >= 3, got {J}")
    which = which.upper()
    if which == "K1":
        range1 = first_arc_range(0.0)
    elif which == "K2":
        range1 = (0.0, 2 * math.pi)
    else:
        raise ValidationError(f"unknown deterministic shape {which!r}")
    return ShapeSpec(BallUnion(_two_arc_centers(range1, J), TUBE_RADIUS), FAMILY_R)


def shape_stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``(seed, *keys)``.

    Streams for different keys are independent, so shapes can be generated in
    any order or in parallel with identical results.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def sample_random_shape(params: FamilyParams, rng: np.random.Generator) -> ShapeSpec:
    """Draw one shape from the perturbed two-arc family.

    The amplitudes ``a1, a2, b1, b2`` are drawn in that order from
    ``Normal(1, noise_sd^2)``.
    """
    a1, a2, b1, b2 = rng.normal(1.0, params.noise_sd, size=4)
    centers = _two_arc_centers(first_arc_range(params.epsilon), params.curve_points,
                               a1=a1, b1=b1, a2=a2, b2=b2)
    return ShapeSpec(BallUnion(centers, params.tube_radius), FAMILY_R)


def sample_group(params: FamilyParams, n: int, seed: int, *keys: int) -> list[ShapeSpec]:
    """``n`` shapes, the i-th drawn from ``shape_stream(seed, *keys, i)``."""
    return [sample_random_shape(params, shape_stream(seed, *keys, i)) for i in range(n)]

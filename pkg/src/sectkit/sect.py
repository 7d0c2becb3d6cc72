"""Smooth Euler characteristic transform samples, ECT samples and distances.

The SECT of a curve chi on ``[0, T]`` is ``F(t) - (t / T) F(T)`` with
``F(t) = int_0^t chi``.  Because chi is a step function, ``F`` is piecewise
linear and is evaluated exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ecc import DEFAULT_MAX_DIM, DirectionGrid, ECCurve, shape_eccs
from .errors import GridMismatchError, ParseError, ValidationError
from .shapes import ShapeSpec


@dataclass(frozen=True)
class LevelGrid:
    T: float
    count: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValidationError(f"horizon T must be positive, got {self.T}")
        if int(self.count) != self.count or self.count < 2:
            raise ValidationError(f"need at least 2 levels, got {self.count}")
        object.__setattr__(self, "count", int(self.count))

    @property
    def levels(self) -> np.ndarray:
        # multiply before dividing so the last level is exactly T
        return np.arange(1, self.count + 1) * self.T / self.count

    @property
    def step(self) -> float:
        return self.T / self.count


@dataclass(frozen=True)
class _Field:
    grid: DirectionGrid
    levels: LevelGrid
    values: np.ndarray
    R: float | None = None
    shape_id: str = ""

    kind = ""

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (len(self.grid), self.levels.count):
            raise ValidationError(f"field shape {v.shape} does not match grid "
                                  f"({len(self.grid)}, {self.levels.count})")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.R is None:
            object.__setattr__(self, "R", self.levels.T / 2)

    def same_grid(self, other) -> bool:
        return self.grid == other.grid and self.levels == other.levels

    def manifest(self) -> dict:
        return {"d": self.grid.dim, "Gamma": len(self.grid), "Delta": self.levels.count,
                "T": self.levels.T, "R": self.R, "shape_id": self.shape_id, "kind": self.kind,
                "directions": self.grid.directions.tolist()}


@dataclass(frozen=True)
class SECTField(_Field):
    kind = "sect"

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("SECT values must be finite")


@dataclass(frozen=True)
class ECTField(_Field):
    kind = "ect"

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype.kind == "f":
            if not np.all(vals == np.round(vals)):
                raise ValidationError("ECT values must be integers")
        object.__setattr__(self, "values", vals.astype(np.int64))
        super().__post_init__()


def _check_horizon(curve: ECCurve, levels: LevelGrid):
    if not math.isclose(curve.T, levels.T, rel_tol=1e-12, abs_tol=0.0):
        raise GridMismatchError(f"curve horizon {curve.T} does not match level grid horizon {levels.T}")


def antiderivative(curve: ECCurve, t) -> np.ndarray:
    """``int_0^t chi`` evaluated exactly at each ``t``."""
    edges, vals = curve.pieces()
    cum = np.concatenate([[0.0], np.cumsum(vals[:-1] * np.diff(edges)[:-1])])
    t = np.asarray(t, dtype=float)
    # the piece containing t; the last piece extends to T
    k = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(vals) - 1)
    return cum[k] + vals[k] * (t - edges[k])


def sect_from_ecc(curve: ECCurve, levels: LevelGrid, method: str = "exact", subintervals: int = 100_000):
    """SECT values at ``levels``.

    ``method="riemann"`` replaces the integral by a left Riemann sum on
    ``subintervals`` equal steps; it exists for consistency checks only.
    """
    _check_horizon(curve, levels)
    t = levels.levels
    T = levels.T
    if method == "exact":
        F = antiderivative(curve, t)
        FT = antiderivative(curve, T)
    elif method == "riemann":
        grid = np.arange(subintervals) * (T / subintervals)
        cum = np.concatenate([[0.0], np.cumsum(curve(grid)) * (T / subintervals)])
        pos = np.minimum(np.floor(t / T * subintervals + 1e-9).astype(int), subintervals)
        F = cum[pos]
        FT = cum[-1]
    else:
        raise ValidationError(f"unknown integration method {method!r}")
    out = F - t / T * FT
    out[-1] = F[-1] - FT  # t_Delta == T
    return out


def sect_many(curves, levels: LevelGrid) -> np.ndarray:
    """SECT values of many curves at once, shape ``(len(curves), Delta)``.

    Uses ``F(t) = sum_k j_k max(t - b_k, 0)`` over the jumps ``j_k`` at
    breakpoints ``b_k``, padded to a common jump count.
    """
    curves = list(curves)
    for c in curves:
        _check_horizon(c, levels)
    t, T = levels.levels, levels.T
    K = max([len(c.breakpoints) for c in curves], default=0)
    B = np.full((len(curves), K), T)
    J = np.zeros((len(curves), K))
    for i, c in enumerate(curves):
        k = len(c.breakpoints)
        B[i, :k] = c.breakpoints
        J[i, :k] = np.diff(c.values, prepend=0)
    F = np.einsum("nk,nkd->nd", J, np.maximum(t[None, None, :] - B[:, :, None], 0.0))
    out = F - (t / T)[None, :] * F[:, -1:]
    out[:, -1] = 0.0
    return out


def ect_samples(curve: ECCurve, levels: LevelGrid) -> np.ndarray:
    _check_horizon(curve, levels)
    return curve(levels.levels).astype(np.int64)


def sect_field(shape: ShapeSpec, grid: DirectionGrid, levels: LevelGrid, backend="arcs",
               shape_id: str = "", max_dim: int = DEFAULT_MAX_DIM):
    """SECT and ECT fields of ``shape`` over a direction and level grid."""
    if not math.isclose(levels.T, shape.T, rel_tol=1e-12):
        raise GridMismatchError(f"level horizon {levels.T} differs from 2R = {shape.T}")
    if grid.dim != shape.dim:
        raise GridMismatchError(f"direction dimension {grid.dim} != shape dimension {shape.dim}")
    curves = shape_eccs(shape, grid.directions, backend, max_dim)
    return fields_from_curves(curves, grid, levels, shape.bounding_radius, shape_id)


def fields_from_curves(curves, grid, levels, R=None, shape_id=""):
    sect = np.array([sect_from_ecc(c, levels) for c in curves])
    ect = np.array([ect_samples(c, levels) for c in curves])
    return (SECTField(grid, levels, sect, R, shape_id), ECTField(grid, levels, ect, R, shape_id))


def rho_discrete(a: ECTField, b: ECTField) -> float:
    """``max_p (sum_q (a_pq - b_pq)^2)^(1/2)``, without a quadrature weight."""
    if not a.same_grid(b):
        raise GridMismatchError("ECT fields are on different grids")
    diff = a.values.astype(float) - b.values.astype(float)
    return float(np.sqrt((diff * diff).sum(axis=1)).max())


def rho_matrix(values: np.ndarray) -> np.ndarray:
    """Pairwise ``rho_discrete`` for a stack of ``(N, Gamma, Delta)`` ECT arrays."""
    v = np.asarray(values, dtype=float)
    sq = np.einsum("npq,npq->np", v, v)
    gram = np.einsum("npq,mpq->nmp", v, v)
    d2 = sq[:, None, :] + sq[None, :, :] - 2 * gram
    # integer data: squared distances are integers, so rounding removes cancellation noise
    d2 = np.maximum(np.rint(d2), 0.0) if np.all(v == np.round(v)) else np.maximum(d2, 0.0)
    return np.sqrt(d2.max(axis=2))


def h_norm_diff(c1: ECCurve, c2: ECCurve) -> float:
    """L2 norm on ``[0, T]`` of ``(chi1 - mean chi1) - (chi2 - mean chi2)``."""
    if c1.T != c2.T:
        raise GridMismatchError(f"curve horizons differ: {c1.T} vs {c2.T}")
    T = c1.T
    edges = np.unique(np.concatenate([[0.0, T], c1.breakpoints, c2.breakpoints]))
    mids = edges[:-1]
    widths = np.diff(edges)
    g = (c1(mids) - c2(mids)).astype(float)
    g -= np.dot(g, widths) / T
    return float(math.sqrt(max(np.dot(g * g, widths), 0.0)))


def holder_constant(M: float, R: float, d: int) -> float:
    """Constant ``C*`` of the Hölder bound on SECT differences."""
    return math.sqrt(16 * M**3 * R / d + 32 * M**3 * R / d + 64 * M**4 * R / d**2)


# --------------------------------------------------------------------------- #
# file I/O

def _fmt(x) -> str:
    return repr(float(x)) if not isinstance(x, (int, np.integer)) else str(int(x))


def _stem(path) -> str:
    path = str(path)
    for ext in (".csv", ".json"):
        if path.endswith(ext):
            return path[: -len(ext)]
    return path


def write_field(path, fld: _Field) -> Path:
    """Write ``<path>.csv`` and ``<path>.json``; returns the CSV path."""
    stem = _stem(path)
    csv = Path(stem + ".csv")
    rows = []
    for row in fld.values:
        rows.append(",".join(_fmt(x) for x in row))
    csv.write_text("\n".join(rows) + "\n")
    Path(stem + ".json").write_text(json.dumps(fld.manifest(), indent=2) + "\n")
    return csv


def read_field(path) -> _Field:
    """Read a field from its CSV or manifest path."""
    stem = _stem(path)
    man_path, csv_path = Path(stem + ".json"), Path(stem + ".csv")
    try:
        man = json.loads(man_path.read_text())
    except FileNotFoundError as exc:
        raise ParseError(f"missing manifest {man_path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest {man_path}: {exc}") from exc
    try:
        kind = man["kind"]
        dirs = np.asarray(man["directions"], dtype=float)
        levels = LevelGrid(float(man["T"]), int(man["Delta"]))
        d, gamma = int(man["d"]), int(man["Gamma"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{man_path}: malformed manifest ({exc})") from exc
    if dirs.shape != (gamma, d):
        raise ParseError(f"{man_path}: directions have shape {dirs.shape}, expected ({gamma}, {d})")
    try:
        text = csv_path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {csv_path}: {exc}") from exc
    try:
        rows = [[float(x) for x in line.split(",")] for line in text.splitlines() if line.strip()]
        values = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ParseError(f"{csv_path}: malformed CSV ({exc})") from exc
    if values.shape != (gamma, levels.count):
        raise ParseError(f"{csv_path}: expected {gamma}x{levels.count} values, found {values.shape}")
    cls = {"sect": SECTField, "ect": ECTField}.get(kind)
    if cls is None:
        raise ParseError(f"{man_path}: unknown field kind {kind!r}")
    return cls(DirectionGrid(dirs), levels, values, man.get("R"), str(man.get("shape_id", "")))


def read_field_dir(directory, kind: str | None = None) -> list[_Field]:
    """All fields in ``directory`` (sorted by file name), optionally of one kind."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError(f"{directory} is not a directory")
    out = []
    for man in sorted(directory.glob("*.json")):
        try:
            k = json.loads(man.read_text()).get("kind")
        except (OSError, json.JSONDecodeError, AttributeError) as exc:
            raise ParseError(f"cannot read manifest {man}: {exc}") from exc
        if kind is None or k == kind:
            out.append(read_field(man))
    return out

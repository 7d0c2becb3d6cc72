"""Two-sample tests on SECT/ECT fields.

Three procedures are provided:

* :func:`chi2_test` on Karhunen-Loève scores of paired SECT differences along
  the estimated distinguishing direction,
* :func:`permutation_test`, which calibrates the same statistic by relabeling,
* :func:`randomization_nhst`, a relabeling test on the within-group ECT loss.

Direction indices in this module are 1-based, matching ``p = 1..Gamma``.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .chi2 import chi2_quantile, chi2_sf
from .errors import GridMismatchError, NumericalRankError, ValidationError
from .sect import ECTField, SECTField, rho_matrix
from .shapes import shape_stream

SYM_TOL = 1e-10
RANK_TOL = 1e-12
# cumulative ratios such as 0.9 + 0.05 land a few ulps above 0.95
_SELECT_SLACK = 1e-12


@dataclass
class GroupSample:
    """One group of ``n`` shapes: stacked ``(n, Gamma, Delta)`` SECT (and ECT) values.

    Parameters
    ----------
    label : 1 or 2
    sect : array of shape ``(n, Gamma, Delta)``
    T : filtration horizon
    ect : optional integer array with the same shape as ``sect``
    """

    label: int
    sect: np.ndarray | None
    T: float
    ect: np.ndarray | None = None
    directions: np.ndarray | None = None

    def __post_init__(self):
        if self.label not in (1, 2):
            raise ValidationError(f"group label must be 1 or 2, got {self.label}")
        for name in ("sect", "ect"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float if name == "sect" else np.int64)
                if arr.ndim != 3:
                    raise ValidationError(f"{name} values must have shape (n, Gamma, Delta)")
                setattr(self, name, arr)
        if self.sect is None and self.ect is None:
            raise ValidationError("a group needs SECT or ECT values")
        if self.sect is not None and self.ect is not None and self.sect.shape != self.ect.shape:
            raise ValidationError("SECT and ECT stacks differ in shape")
        if self.n < 1:
            raise ValidationError("empty group")

    @classmethod
    def from_fields(cls, label: int, fields: Sequence) -> "GroupSample":
        """Build from SECTField/ECTField objects (any mix, paired by order of appearance)."""
        sect = [f for f in fields if isinstance(f, SECTField)]
        ect = [f for f in fields if isinstance(f, ECTField)]
        allf = sect + ect
        if not allf:
            raise ValidationError("a group needs at least one field")
        ref = allf[0]
        for f in allf[1:]:
            if not f.same_grid(ref):
                raise GridMismatchError(f"field {f.shape_id or '?'} is on a different grid from "
                                        f"{ref.shape_id or '?'}")
        if sect and ect and len(sect) != len(ect):
            raise ValidationError(f"{len(sect)} SECT fields but {len(ect)} ECT fields")
        return cls(label,
                   np.stack([f.values for f in sect]) if sect else None,
                   ref.levels.T,
                   np.stack([f.values for f in ect]) if ect else None,
                   np.asarray(ref.grid.directions))

    @property
    def values(self) -> np.ndarray:
        return self.sect if self.sect is not None else self.ect

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape[1:]

    def head(self, n: int) -> "GroupSample":
        return GroupSample(self.label, None if self.sect is None else self.sect[:n], self.T,
                           None if self.ect is None else self.ect[:n], self.directions)


@dataclass(frozen=True)
class KLSystem:
    """Discretized Karhunen-Loève eigensystem.

    ``eigenvalues[l]`` is ``lambda_hat_{l+1}``; column ``l`` of
    ``eigenfunctions`` holds ``phi_hat_{l+1}(t_q)``.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    T: float
    L: int | None = None

    @property
    def delta(self) -> int:
        return len(self.eigenvalues)

    def with_L(self, L: int) -> "KLSystem":
        if not 1 <= L <= self.delta:
            raise ValidationError(f"L must be in [1, {self.delta}], got {L}")
        return KLSystem(self.eigenvalues, self.eigenfunctions, self.T, int(L))

    def orthonormality_residual(self) -> float:
        phi = self.eigenfunctions
        gram = (self.T / self.delta) * phi.T @ phi
        return float(np.abs(gram - np.eye(self.delta)).max())


@dataclass
class TestReport:
    method: str
    statistic: float
    threshold: float
    p_value: float | None
    decision: str
    nu_star_index: int | None = None
    L_hat: int | None = None
    R_F: float | None = None
    R_inf: float | None = None
    alpha: float | None = None
    n: int | None = None
    seed: int | None = None
    permutations: int | None = None
    k_star: int | None = None
    diagnostics: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @property
    def rejected(self) -> bool:
        return self.decision == "Reject"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, default=_json_default) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "TestReport":
        text = text_or_path
        if isinstance(text_or_path, Path) or (isinstance(text_or_path, str) and not text_or_path.lstrip().startswith("{")):
            text = Path(text_or_path).read_text()
        return cls(**json.loads(text))


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


# --------------------------------------------------------------------------- #
# estimation

def _check_pair(g1: GroupSample, g2: GroupSample):
    if g1.shape != g2.shape:
        raise GridMismatchError(f"groups have grids {g1.shape} and {g2.shape}")
    if not math.isclose(g1.T, g2.T, rel_tol=1e-12):
        raise GridMismatchError(f"groups have horizons {g1.T} and {g2.T}")
    if g1.directions is not None and g2.directions is not None and not np.array_equal(g1.directions, g2.directions):
        raise GridMismatchError("groups use different direction sets")


def _truncate(g1: GroupSample, g2: GroupSample):
    """Pair by index: the larger group contributes its first ``min(n1, n2)`` members."""
    n = min(g1.n, g2.n)
    return (g1 if g1.n == n else g1.head(n)), (g2 if g2.n == n else g2.head(n))


def _sect(g: GroupSample) -> np.ndarray:
    if g.sect is None:
        raise ValidationError(f"group {g.label} has no SECT values")
    return g.sect


def mean_field(group: GroupSample) -> np.ndarray:
    """Entrywise sample mean of the group's SECT values."""
    return _sect(group).mean(axis=0)


def distinguishing_direction(m1: np.ndarray, m2: np.ndarray) -> int:
    """1-based index ``p`` maximizing ``max_q |m1[p, q] - m2[p, q]|``; ties go to the lowest ``p``."""
    m1, m2 = np.asarray(m1), np.asarray(m2)
    if m1.shape != m2.shape:
        raise GridMismatchError(f"mean arrays differ in shape: {m1.shape} vs {m2.shape}")
    gap = np.abs(m1 - m2).max(axis=1)
    return int(np.argmax(gap)) + 1  # argmax returns the first maximum


def _rows(group: GroupSample, p: int) -> np.ndarray:
    vals = _sect(group)
    if not 1 <= p <= vals.shape[1]:
        raise ValidationError(f"direction index {p} out of range 1..{vals.shape[1]}")
    return vals[:, p - 1, :]


def covariance_group(group: GroupSample, p: int) -> np.ndarray:
    """Sample covariance (divisor ``n - 1``) of the group's rows at direction ``p``."""
    X = _rows(group, p)
    if len(X) < 2:
        raise ValidationError("covariance needs at least 2 shapes per group")
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / (len(X) - 1)


def norm_ratios(C1: np.ndarray, C2: np.ndarray) -> tuple[float, float]:
    """Frobenius and max-entry ratios ``||C1 - C2|| / ||C1||``."""
    C1, C2 = np.asarray(C1, dtype=float), np.asarray(C2, dtype=float)
    if C1.shape != C2.shape:
        raise GridMismatchError("covariance matrices differ in shape")
    f1 = np.linalg.norm(C1)
    m1 = np.abs(C1).max() if C1.size else 0.0
    if f1 == 0 or m1 == 0:
        raise ValidationError("C1 is zero; norm ratios are undefined")
    D = C1 - C2
    return float(np.linalg.norm(D) / f1), float(np.abs(D).max() / m1)


def _pooled(X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    Z = np.concatenate([X1 - X1.mean(axis=0), X2 - X2.mean(axis=0)])
    return Z.T @ Z / (len(Z) - 2)


def covariance_pooled(g1: GroupSample, g2: GroupSample, p: int) -> np.ndarray:
    """Covariance of within-group centered rows at direction ``p``, divisor ``n1 + n2 - 2``."""
    _check_pair(g1, g2)
    if g1.n < 2 or g2.n < 2:
        raise ValidationError("pooled covariance needs at least 2 shapes in each group")
    return _pooled(_rows(g1, p), _rows(g2, p))


def kl_decompose(C: np.ndarray, T: float) -> KLSystem:
    """Eigensystem of ``C`` scaled to the continuous operator on ``[0, T]``.

    Eigenvalues are sorted in decreasing order; each eigenvector is signed so
    its first nonzero component is positive.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValidationError("covariance must be a square matrix")
    scale = max(np.abs(C).max(), 1.0)
    if np.abs(C - C.T).max() > SYM_TOL * scale:
        raise ValidationError("covariance matrix is not symmetric")
    delta = C.shape[0]
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(w, kind="stable")[::-1]
    w, V = w[order], V[:, order]
    tol = 1e-12
    first = np.argmax(np.abs(V) > tol * np.abs(V).max(axis=0), axis=0)
    signs = np.sign(V[first, np.arange(delta)])
    signs[signs == 0] = 1.0
    V = V * signs
    return KLSystem((T / delta) * w, math.sqrt(delta / T) * V, float(T))


def select_L(eigenvalues, threshold: float = 0.95) -> int:
    """Smallest ``l`` whose cumulative share of ``sum |lambda|`` exceeds ``threshold``."""
    lam = np.abs(np.asarray(eigenvalues, dtype=float))
    if lam.size == 0:
        raise ValidationError("no eigenvalues given")
    total = lam.sum()
    if total == 0:
        raise ValidationError("all eigenvalues are zero")
    share = np.cumsum(lam) / total
    hits = np.flatnonzero(share > threshold + _SELECT_SLACK)
    return int(hits[0]) + 1 if len(hits) else len(lam)


def _xi(D: np.ndarray, kl: KLSystem, L: int) -> np.ndarray:
    lam = kl.eigenvalues[:L]
    top = kl.eigenvalues[0]
    bad = np.flatnonzero(lam <= RANK_TOL * max(top, 0.0))
    if top <= 0 or len(bad):
        l = int(bad[0]) + 1 if len(bad) else 1
        raise NumericalRankError(
            f"eigenvalue {l} of the pooled covariance is numerically zero ({lam[l - 1]:.3g}) but L={L}; "
            "lower the variance threshold used to select L")
    step = kl.T / kl.delta
    return (step * (D @ kl.eigenfunctions[:, :L])).T / np.sqrt(2 * lam)[:, None]


def xi_statistics(g1: GroupSample, g2: GroupSample, p: int, kl: KLSystem) -> np.ndarray:
    """``(L, n)`` matrix of KL scores of the paired differences at direction ``p``."""
    _check_pair(g1, g2)
    g1, g2 = _truncate(g1, g2)
    L = kl.L if kl.L is not None else select_L(kl.eigenvalues)
    return _xi(_rows(g1, p) - _rows(g2, p), kl, L)


def chi2_statistic(xi: np.ndarray) -> float:
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    n = xi.shape[1]
    return float(np.sum((xi.sum(axis=1) / math.sqrt(n)) ** 2))


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")


def chi2_test(xi: np.ndarray, alpha: float = 0.05) -> TestReport:
    """Reject when ``sum_l (n^-1/2 sum_i xi_li)^2`` exceeds the ``1 - alpha`` quantile of chi2_L."""
    _check_alpha(alpha)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    L, n = xi.shape
    S0 = chi2_statistic(xi)
    q = chi2_quantile(1 - alpha, L)
    return TestReport("chi2", S0, q, chi2_sf(S0, L), "Reject" if S0 > q else "Accept",
                      L_hat=L, alpha=alpha, n=n)


# --------------------------------------------------------------------------- #
# pipelines

def _pipeline(A: np.ndarray, B: np.ndarray, T: float, L: int | None = None, threshold: float = 0.95):
    """Statistic of the chi-square procedure on stacks ``A``, ``B`` of shape ``(n, Gamma, Delta)``."""
    p = distinguishing_direction(A.mean(axis=0), B.mean(axis=0))
    X1, X2 = A[:, p - 1, :], B[:, p - 1, :]
    kl = kl_decompose(_pooled(X1, X2), T)
    if L is None:
        L = select_L(kl.eigenvalues, threshold)
    xi = _xi(X1 - X2, kl, L)
    return chi2_statistic(xi), p, L, xi


def _diagnostics(A, B, p):
    n1, n2 = len(A), len(B)
    X1, X2 = A[:, p - 1, :], B[:, p - 1, :]
    C1 = np.cov(X1, rowvar=False, ddof=1) if n1 > 1 else None
    C2 = np.cov(X2, rowvar=False, ddof=1) if n2 > 1 else None
    if C1 is None or C2 is None:
        return None, None
    try:
        return norm_ratios(np.atleast_2d(C1), np.atleast_2d(C2))
    except ValidationError:
        return None, None


def chi2_pipeline(g1: GroupSample, g2: GroupSample, alpha: float = 0.05, threshold: float = 0.95) -> TestReport:
    """The full chi-square procedure: direction, pooled KL system, scores, decision."""
    _check_alpha(alpha)
    _check_pair(g1, g2)
    g1, g2 = _truncate(g1, g2)
    if g1.n < 2:
        raise ValidationError("each group needs at least 2 shapes")
    A, B = _sect(g1), _sect(g2)
    _, p, L, xi = _pipeline(A, B, g1.T, None, threshold)
    rep = chi2_test(xi, alpha)
    rep.nu_star_index = p
    rep.R_F, rep.R_inf = _diagnostics(A, B, p)
    return rep


def k_star(x: float, total: int) -> int:
    """Largest integer strictly below ``x``, clamped to ``[1, total]``."""
    r = round(x)
    k = r - 1 if abs(x - r) < 1e-9 else math.floor(x)
    return int(min(max(k, 1), total))


def _relabel(seed: int, k: int, n1: int, n2: int, scheme: str) -> np.ndarray:
    """Indices (into the stacked 2n sample) of the new group 1 for permutation ``k``."""
    rng = shape_stream(seed, 0x5EC7, k)
    if scheme == "balanced":
        return np.sort(rng.permutation(n1 + n2)[:n1])
    if scheme == "pairswap":
        swap = rng.integers(0, 2, size=n1).astype(bool)
        idx = np.arange(n1)
        return np.where(swap, idx + n1, idx)
    raise ValidationError(f"unknown permutation scheme {scheme!r}")


def _split(n_total: int, idx: np.ndarray):
    mask = np.zeros(n_total, bool)
    mask[idx] = True
    return idx, np.flatnonzero(~mask)


def _map(fn, items, threads: int | None):
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(k) for k in items]


def permutation_test(g1: GroupSample, g2: GroupSample, alpha: float = 0.05, permutations: int = 1000,
                     seed: int = 0, scheme: str = "balanced", threshold: float = 0.95,
                     threads: int | None = None) -> TestReport:
    """Chi-square statistic calibrated by relabeling the pooled shapes.

    Every permutation reruns the whole procedure with ``L`` fixed to the value
    chosen on the original data.  ``scheme="pairswap"`` swaps labels within
    index pairs instead of drawing uniform balanced relabelings.
    """
    _check_alpha(alpha)
    _check_pair(g1, g2)
    if permutations < 1:
        raise ValidationError("need at least one permutation")
    g1, g2 = _truncate(g1, g2)
    n = g1.n
    if n < 2:
        raise ValidationError("each group needs at least 2 shapes")
    A, B = _sect(g1), _sect(g2)
    if (1 - alpha) * permutations <= 1:
        raise ValidationError(f"{permutations} permutations are too few for alpha={alpha}")
    kst = k_star((1 - alpha) * permutations, permutations)
    S0, p, L0, _ = _pipeline(A, B, g1.T, None, threshold)
    pooled = np.concatenate([A, B])

    def one(k):
        i1, i2 = _split(2 * n, _relabel(seed, k, n, n, scheme))
        return _pipeline(pooled[i1], pooled[i2], g1.T, L0)[0]

    S = np.array(_map(one, range(1, permutations + 1), threads))
    ref = np.sort(S)[kst - 1]
    pval = (1 + int(np.sum(S >= S0))) / (permutations + 1)
    RF, Rinf = _diagnostics(A, B, p)
    return TestReport("permutation", S0, float(ref), pval, "Reject" if S0 > ref else "Accept",
                      nu_star_index=p, L_hat=L0, R_F=RF, R_inf=Rinf, alpha=alpha, n=n, seed=seed,
                      permutations=permutations, k_star=kst, diagnostics={"scheme": scheme})


def within_group_loss(D: np.ndarray, i1: np.ndarray, i2: np.ndarray) -> float:
    """``(2n(n-1))^-1`` times the sum of within-group pairwise distances (all ordered pairs)."""
    n = len(i1)
    return float((D[np.ix_(i1, i1)].sum() + D[np.ix_(i2, i2)].sum()) / (2 * n * (n - 1)))


def randomization_nhst(g1: GroupSample, g2: GroupSample, alpha: float = 0.05, permutations: int = 1000,
                       seed: int = 0, scheme: str = "balanced", threads: int | None = None) -> TestReport:
    """Relabeling test on the within-group ECT loss; small loss is evidence against the null."""
    _check_alpha(alpha)
    _check_pair(g1, g2)
    if permutations < 1:
        raise ValidationError("need at least one permutation")
    g1, g2 = _truncate(g1, g2)
    n = g1.n
    if n < 2:
        raise ValidationError("each group needs at least 2 shapes")
    if g1.ect is None or g2.ect is None:
        raise ValidationError("the randomization test needs ECT values for both groups")
    x = alpha * permutations
    kst = k_star(x, permutations)
    if x <= 1:
        warnings.warn(f"alpha * permutations = {x:g} leaves no order statistic below it; using k*=1",
                      RuntimeWarning, stacklevel=2)
    D = rho_matrix(np.concatenate([g1.ect, g2.ect]))
    idx = np.arange(2 * n)
    S0 = within_group_loss(D, idx[:n], idx[n:])

    def one(k):
        i1, i2 = _split(2 * n, _relabel(seed, k, n, n, scheme))
        return within_group_loss(D, i1, i2)

    S = np.array(_map(one, range(1, permutations + 1), threads))
    ref = np.sort(S)[kst - 1]
    pval = (1 + int(np.sum(S <= S0))) / (permutations + 1)
    return TestReport("nhst", S0, float(ref), pval, "Reject" if S0 < ref else "Accept",
                      alpha=alpha, n=n, seed=seed, permutations=permutations, k_star=kst,
                      diagnostics={"scheme": scheme})

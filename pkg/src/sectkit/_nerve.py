"""Čech nerve enumeration for unions of equal-radius balls (numba kernels).

A subset of centers spans a nerve simplex iff the minimum enclosing ball of
those centers has radius <= r.  Simplices are enumerated once by a depth-first
search over cliques of the 2r-neighbourhood graph.  Each simplex enters a
sublevel filtration at the largest height among its vertices, so instead of
storing the nerve we accumulate, for every direction, the signed simplex count
``(-1)^dim`` against the vertex that attains that maximum.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_EPS = 1e-10


@nb.njit(cache=True)
def _ball_through(P, idx, k, d, c_out):
    """Smallest ball with points ``P[idx[:k]]`` on its boundary; returns radius."""
    p0 = P[idx[0]]
    if k == 1:
        for a in range(d):
            c_out[a] = p0[a]
        return 0.0
    if k == 2:
        p1 = P[idx[1]]
        r2 = 0.0
        for a in range(d):
            c_out[a] = 0.5 * (p0[a] + p1[a])
            r2 += (0.5 * (p1[a] - p0[a])) ** 2
        return np.sqrt(r2)
    m = k - 1
    A = np.empty((d, m))
    for j in range(m):
        for a in range(d):
            A[a, j] = P[idx[j + 1], a] - p0[a]
    G = A.T @ A
    rhs = np.empty(m)
    for j in range(m):
        rhs[j] = 0.5 * G[j, j]
    # singular Gram matrix means affinely dependent support points
    det = np.linalg.det(G)
    scale = 1.0
    for j in range(m):
        scale *= max(G[j, j], 1e-300)
    if abs(det) <= 1e-13 * scale:
        return np.inf
    lam = np.linalg.solve(G, rhs)
    r2 = 0.0
    for a in range(d):
        v = 0.0
        for j in range(m):
            v += A[a, j] * lam[j]
        c_out[a] = p0[a] + v
        r2 += v * v
    return np.sqrt(r2)


@nb.njit(cache=True)
def _outside(p, c, rho, d):
    s = 0.0
    for a in range(d):
        t = p[a] - c[a]
        s += t * t
    return np.sqrt(s) > rho * (1.0 + _EPS) + 1e-14


@nb.njit(cache=True)
def _meb_fixed(P, pts, m, q, d, c):
    """Minimum enclosing ball of ``P[pts[:m]]`` and ``P[q]``, with ``P[q]`` on the boundary.

    Iterative Welzl with nested support loops; ``c`` receives the center.
    """
    idx = np.empty(4, np.int64)
    idx[0] = q
    rho = _ball_through(P, idx, 1, d, c)
    for i in range(m):
        if _outside(P[pts[i]], c, rho, d):
            idx[1] = pts[i]
            rho = _ball_through(P, idx, 2, d, c)
            for j in range(i):
                if _outside(P[pts[j]], c, rho, d):
                    idx[2] = pts[j]
                    rho = _ball_through(P, idx, 3, d, c)
                    if d == 3:
                        for k in range(j):
                            if _outside(P[pts[k]], c, rho, d):
                                idx[3] = pts[k]
                                rho = _ball_through(P, idx, 4, d, c)
    return rho


@nb.njit(cache=True)
def meb_radius(P):
    """Radius of the minimum enclosing ball of all rows of ``P``."""
    n, d = P.shape
    c = np.empty(d)
    pts = np.arange(n)
    rho = 0.0
    for a in range(d):
        c[a] = P[0, a]
    for i in range(1, n):
        if _outside(P[i], c, rho, d):
            rho = _meb_fixed(P, pts, i, i, d, c)
    return rho


@nb.njit(cache=True)
def _is_adjacent(indptr, indices, u, w):
    lo = indptr[u]
    hi = indptr[u + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        x = indices[mid]
        if x == w:
            return True
        if x < w:
            lo = mid + 1
        else:
            hi = mid
    return False


@nb.njit(cache=True)
def nerve_jumps(X, r, indptr, indices, heights, max_dim):
    """Signed nerve simplex counts keyed by (direction, top vertex).

    Parameters
    ----------
    X : (n, d) centers.
    indptr, indices : CSR adjacency of the 2r-graph, each row sorted ascending.
    heights : (G, n) entry heights per direction (``inf`` never enters).
    max_dim : largest simplex dimension allowed.

    Returns
    -------
    jumps : (G, n) int64, total counts, and an overflow flag (1 if some
    simplex would exceed ``max_dim``).
    """
    n, d = X.shape
    G = heights.shape[0]
    jumps = np.zeros((G, n), np.int64)
    counts = np.zeros(max_dim + 2, np.int64)
    cap = max_dim + 1  # vertices per simplex
    maxdeg = 0
    for v in range(n):
        maxdeg = max(maxdeg, indptr[v + 1] - indptr[v])
    cand = np.empty((cap + 1, maxdeg + 1), np.int64)
    ncand = np.zeros(cap + 1, np.int64)
    pos = np.zeros(cap + 1, np.int64)
    stack = np.empty(cap + 1, np.int64)
    centers = np.empty((cap + 1, d))
    radii = np.zeros(cap + 1)
    top = np.empty((cap + 1, G), np.int64)
    c = np.empty(d)
    for v in range(n):
        stack[0] = v
        for a in range(d):
            centers[0, a] = X[v, a]
        radii[0] = 0.0
        for g in range(G):
            top[0, g] = v
            jumps[g, v] += 1
        counts[0] += 1
        k = 0
        for e in range(indptr[v], indptr[v + 1]):
            w = indices[e]
            if w > v:
                cand[0, k] = w
                k += 1
        ncand[0] = k
        pos[0] = 0
        depth = 0  # index of last vertex in stack
        while depth >= 0:
            if pos[depth] >= ncand[depth]:
                depth -= 1
                continue
            w = cand[depth, pos[depth]]
            pos[depth] += 1
            # Čech test for stack[:depth+1] + w
            inside = not _outside(X[w], centers[depth], radii[depth], d)
            if inside:
                rho = radii[depth]
                for a in range(d):
                    c[a] = centers[depth, a]
            else:
                rho = _meb_fixed(X, stack, depth + 1, w, d, c)
            if rho > r * (1.0 + 1e-12):
                continue
            nd = depth + 1
            if nd > max_dim:
                return jumps, counts, 1
            stack[nd] = w
            radii[nd] = rho
            for a in range(d):
                centers[nd, a] = c[a]
            sign = 1 if nd % 2 == 0 else -1
            counts[nd] += 1
            for g in range(G):
                t = top[depth, g]
                if heights[g, w] > heights[g, t]:
                    t = w
                top[nd, g] = t
                jumps[g, t] += sign
            # candidates after w that are adjacent to w
            k = 0
            for j in range(pos[depth], ncand[depth]):
                u = cand[depth, j]
                if _is_adjacent(indptr, indices, w, u):
                    cand[nd, k] = u
                    k += 1
            ncand[nd] = k
            pos[nd] = 0
            depth = nd
    return jumps, counts, 0


def neighbour_graph(X: np.ndarray, r: float):
    """CSR adjacency of centers at distance <= 2r (no self loops)."""
    from scipy.spatial import cKDTree

    tree = cKDTree(X)
    pairs = tree.query_pairs(2 * r * (1 + 1e-12), output_type="ndarray")
    n = len(X)
    if len(pairs):
        dist = np.linalg.norm(X[pairs[:, 0]] - X[pairs[:, 1]], axis=1)
        pairs = pairs[dist <= 2 * r * (1 + 1e-12)]
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]]) if len(pairs) else np.empty(0, np.int64)
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]]) if len(pairs) else np.empty(0, np.int64)
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(n + 1, np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    return indptr, cols.astype(np.int64)

"""Compiled inner loops: cost matrices, assignment, transport, set distances.

Patterns reach these kernels as float64 arrays of shape ``(m, d)``.
Categorical tokens are pre-encoded as integer codes in a single column.
Everything here is pure and ``nogil`` so the pairwise driver can fan out
over threads without changing results.
"""

import numpy as np
from numba import njit

EUCLIDEAN = 0
DISCRETE = 1

HAUSDORFF = 0
WASSERSTEIN = 1
OSPA = 2

_INF = np.inf


@njit(cache=True, nogil=True)
def base_dist(x, y, base):
    if base == DISCRETE:
        return 0.0 if x[0] == y[0] else 1.0
    s = 0.0
    for k in range(x.shape[0]):
        t = x[k] - y[k]
        s += t * t
    return np.sqrt(s)


@njit(cache=True, nogil=True)
def cost_matrix(X, Y, base, p, cap):
    """``min(cap, d(x_i, y_j)) ** p``; pass ``cap=inf`` for no cap."""
    m, n = X.shape[0], Y.shape[0]
    C = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            d = base_dist(X[i], Y[j], base)
            if d > cap:
                d = cap
            C[i, j] = d if p == 1.0 else d ** p
    return C


@njit(cache=True, nogil=True)
def assignment(C):
    """Min-cost injective row->column assignment for an m x n matrix, m <= n.

    Shortest-augmenting-path Hungarian method with row/column potentials;
    rows are inserted one at a time so no padding to a square matrix is
    needed. Returns (col_of_row, total_cost).
    """
    m, n = C.shape
    u = np.zeros(m + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)  # match[j] = row (1-based) on column j
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, m + 1):
        match[0] = i
        j0 = 0
        minv[:] = _INF
        used[:] = False
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = _INF
            j1 = -1
            for j in range(1, n + 1):
                if not used[j]:
                    cur = C[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(m, dtype=np.int64)
    for j in range(1, n + 1):
        if match[j] != 0:
            col_of_row[match[j] - 1] = j - 1
    total = 0.0
    for i in range(m):
        total += C[i, col_of_row[i]]
    return col_of_row, total


@njit(cache=True, nogil=True)
def transport(C):
    """Optimal uniform-marginal transport by integer min-cost flow.

    Row i supplies n units and column j demands m units (the marginals
    1/m, 1/n scaled by m*n). Successive shortest paths with Dijkstra on
    reduced costs over a dense residual graph
    (nodes: 0 = source, 1..m rows, m+1..m+n columns, m+n+1 = sink).
    Returns the integer flow matrix and sum(flow * C) / (m * n).
    """
    m, n = C.shape
    V = m + n + 2
    S = 0
    T = m + n + 1
    flow = np.zeros((m, n), dtype=np.int64)
    supply = np.full(m, n, dtype=np.int64)
    demand = np.full(n, m, dtype=np.int64)
    pot = np.zeros(V)
    dist = np.empty(V)
    prev = np.empty(V, dtype=np.int64)
    done = np.empty(V, dtype=np.bool_)
    remaining = m * n
    while remaining > 0:
        dist[:] = _INF
        prev[:] = -1
        done[:] = False
        dist[S] = 0.0
        while True:
            # dense Dijkstra: pick closest unsettled node
            x = -1
            best = _INF
            for w in range(V):
                if not done[w] and dist[w] < best:
                    best = dist[w]
                    x = w
            if x == -1:
                break
            done[x] = True
            if x == S:
                for i in range(m):
                    if supply[i] > 0:
                        rc = pot[S] - pot[1 + i]
                        if rc < 0.0:
                            rc = 0.0
                        nd = best + rc
                        if nd < dist[1 + i]:
                            dist[1 + i] = nd
                            prev[1 + i] = S
            elif x <= m:
                i = x - 1
                for j in range(n):
                    w = m + 1 + j
                    if done[w]:
                        continue
                    rc = C[i, j] + pot[x] - pot[w]
                    if rc < 0.0:
                        rc = 0.0
                    nd = best + rc
                    if nd < dist[w]:
                        dist[w] = nd
                        prev[w] = x
            elif x <= m + n:
                j = x - m - 1
                for i in range(m):
                    if flow[i, j] > 0:
                        w = 1 + i
                        if done[w]:
                            continue
                        rc = -C[i, j] + pot[x] - pot[w]
                        if rc < 0.0:
                            rc = 0.0
                        nd = best + rc
                        if nd < dist[w]:
                            dist[w] = nd
                            prev[w] = x
                if demand[j] > 0 and not done[T]:
                    rc = pot[x] - pot[T]
                    if rc < 0.0:
                        rc = 0.0
                    nd = best + rc
                    if nd < dist[T]:
                        dist[T] = nd
                        prev[T] = x
            else:
                break  # sink settled
        # settled nodes move by their distance, the rest by dist[T]; this
        # keeps every residual reduced cost non-negative after early exit
        dT = dist[T]
        for w in range(V):
            pot[w] += dist[w] if done[w] else dT
        # bottleneck along the path
        amt = remaining
        w = T
        while w != S:
            x = prev[w]
            if w == T:
                amt = min(amt, demand[x - m - 1])
            elif x == S:
                amt = min(amt, supply[w - 1])
            elif x > m:  # backward arc column -> row
                amt = min(amt, flow[w - 1, x - m - 1])
            w = x
        w = T
        while w != S:
            x = prev[w]
            if w == T:
                demand[x - m - 1] -= amt
            elif x == S:
                supply[w - 1] -= amt
            elif x <= m:
                flow[x - 1, w - m - 1] += amt
            else:
                flow[w - 1, x - m - 1] -= amt
            w = x
        remaining -= amt
    total = 0.0
    for i in range(m):
        for j in range(n):
            if flow[i, j] != 0:
                total += flow[i, j] * C[i, j]
    return flow, total / (m * n)


@njit(cache=True, nogil=True)
def hausdorff(X, Y, base):
    m, n = X.shape[0], Y.shape[0]
    D = cost_matrix(X, Y, base, 1.0, _INF)
    h = 0.0
    for i in range(m):
        best = _INF
        for j in range(n):
            if D[i, j] < best:
                best = D[i, j]
        if best > h:
            h = best
    for j in range(n):
        best = _INF
        for i in range(m):
            if D[i, j] < best:
                best = D[i, j]
        if best > h:
            h = best
    return h


@njit(cache=True, nogil=True)
def _swap_needed(X, Y):
    """Canonical argument order (smaller pattern first, then lexicographic),
    so that d(X, Y) and d(Y, X) run the identical computation."""
    m, n = X.shape[0], Y.shape[0]
    if m != n:
        return m > n
    for i in range(m):
        for k in range(X.shape[1]):
            if X[i, k] != Y[i, k]:
                return X[i, k] > Y[i, k]
    return False


@njit(cache=True, nogil=True)
def wasserstein(X, Y, base, p):
    if _swap_needed(X, Y):
        X, Y = Y, X
    C = cost_matrix(X, Y, base, p, _INF)
    flow, total = transport(C)
    if total <= 0.0:
        return 0.0
    return total ** (1.0 / p)


@njit(cache=True, nogil=True)
def ospa(X, Y, base, p, c):
    m, n = X.shape[0], Y.shape[0]
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return c
    if _swap_needed(X, Y):
        X, Y = Y, X
        m, n = n, m
    C = cost_matrix(X, Y, base, p, c)
    _, total = assignment(C)
    val = (total + c ** p * (n - m)) / n
    if val <= 0.0:
        return 0.0
    out = val ** (1.0 / p)
    return out if out < c else c


@njit(cache=True, nogil=True)
def ospa_decompose(X, Y, base, p):
    m, n = X.shape[0], Y.shape[0]
    if _swap_needed(X, Y):
        X, Y = Y, X
        m, n = n, m
    if m == 0:
        return 1.0, 0.0
    C = cost_matrix(X, Y, base, p, _INF)
    _, total = assignment(C)
    return (n - m) / n, total / n


@njit(cache=True, nogil=True)
def set_distance(X, Y, family, base, p, c):
    if family == HAUSDORFF:
        return hausdorff(X, Y, base)
    if family == WASSERSTEIN:
        return wasserstein(X, Y, base, p)
    return ospa(X, Y, base, p, c)


@njit(cache=True, nogil=True)
def distance_rows(coords, offsets, rows, cols_coords, cols_offsets, family, base, p, c,
                  symmetric, out):
    """Fill ``out[r, j]`` for each row index in ``rows``.

    With ``symmetric`` the two collections are the same and only ``j > i``
    is computed; the caller mirrors the upper triangle.
    """
    ncols = cols_offsets.shape[0] - 1
    for r in range(rows.shape[0]):
        i = rows[r]
        X = coords[offsets[i]:offsets[i + 1]]
        start = i + 1 if symmetric else 0
        for j in range(start, ncols):
            Y = cols_coords[cols_offsets[j]:cols_offsets[j + 1]]
            out[i, j] = set_distance(X, Y, family, base, p, c)


@njit(cache=True, nogil=True)
def decompose_rows(coords, offsets, rows, cols_coords, cols_offsets, base, p, symmetric,
                   card_out, feat_out):
    """Pairwise ``ospa_decompose``; two empty patterns give (0, 0)."""
    ncols = cols_offsets.shape[0] - 1
    for r in range(rows.shape[0]):
        i = rows[r]
        X = coords[offsets[i]:offsets[i + 1]]
        start = i + 1 if symmetric else 0
        for j in range(start, ncols):
            Y = cols_coords[cols_offsets[j]:cols_offsets[j + 1]]
            if X.shape[0] == 0 and Y.shape[0] == 0:
                card_out[i, j] = 0.0
                feat_out[i, j] = 0.0
            else:
                card, feat = ospa_decompose(X, Y, base, p)
                card_out[i, j] = card
                feat_out[i, j] = feat

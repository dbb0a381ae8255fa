"""Affinity propagation over set-distance similarities.

Similarities are negated set distances, ``s(n, k) = -d(X_n, X_k)``, and the
diagonal carries the preferences ``s(k, k) = -gamma(X_k)``. Responsibility
and availability messages are exchanged until they settle; each point is
then labelled with the ``k`` maximising ``r(n, k) + a(n, k)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .distances import DistanceSpec, pairwise_distances
from .exceptions import SchemaError
from .patterns import as_patterns
from .validation import check_distance_matrix, make_spec


@dataclass
class APConfig:
    preference: object = "median"
    damping: float = 0.5
    convergence_threshold: float = 1e-6
    max_iter: int = 1000
    stable_iter: int = 50

    def __post_init__(self):
        if not 0 <= self.damping < 1:
            raise ValueError("damping must lie in [0, 1)")
        if not self.convergence_threshold > 0:
            raise ValueError("convergence threshold must be positive")
        if self.max_iter < 1 or self.stable_iter < 1:
            raise ValueError("max_iter and stable_iter must be positive")


@dataclass
class ClusteringResult:
    """Exemplar assignment ``exemplar_of[n]`` (0-based) for every point."""

    exemplar_of: np.ndarray
    exemplars: np.ndarray
    n_iter: int
    converged: bool
    objective: float

    @property
    def labels(self):
        """Cluster ids 0..K-1, numbered by exemplar order."""
        return np.searchsorted(self.exemplars, self.exemplar_of)

    @property
    def n_clusters(self):
        return len(self.exemplars)

    def to_dict(self):
        # 1-based on disk: label n is the index of the exemplar of point n
        return {
            "labels": [int(k) + 1 for k in self.exemplar_of],
            "exemplars": [int(k) + 1 for k in self.exemplars],
            "iterations": int(self.n_iter),
            "converged": bool(self.converged),
            "objective": float(self.objective),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["labels"], dtype=int) - 1,
                   np.asarray(d["exemplars"], dtype=int) - 1,
                   int(d["iterations"]), bool(d["converged"]), float(d["objective"]))


def similarities_from_distances(D):
    return -np.asarray(D, dtype=float)


def preferences(S, strategy="median"):
    """Per-point preferences from the off-diagonal similarities of ``S``.

    ``"median"`` tends to give a moderate number of clusters, ``"min"`` a
    small number; an explicit vector (or scalar) is passed through.
    """
    S = np.asarray(S, dtype=float)
    N = S.shape[0]
    if isinstance(strategy, str):
        off = S[~np.eye(N, dtype=bool)]
        if strategy == "median":
            value = float(np.median(off)) if off.size else 0.0
        elif strategy == "min":
            value = float(np.min(off)) if off.size else 0.0
        else:
            raise ValueError(f"unknown preference strategy {strategy!r}")
        return np.full(N, value)
    pref = np.asarray(strategy, dtype=float)
    if pref.ndim == 0:
        return np.full(N, float(pref))
    if pref.shape != (N,):
        raise ValueError(f"preference vector has length {pref.shape[0]}, expected {N}")
    return pref.copy()


def clustering_objective(S, exemplar_of, pref):
    """Sum of distances to exemplars plus the penalty -pref of each exemplar."""
    S = np.asarray(S, dtype=float)
    exemplar_of = np.asarray(exemplar_of)
    n = np.arange(len(exemplar_of))
    is_ex = exemplar_of == n
    return float(-S[n[~is_ex], exemplar_of[~is_ex]].sum() - np.asarray(pref)[is_ex].sum())


def _finalize(S, exemplar_of, evidence=None):
    """Force every label onto a self-labelled exemplar (c_{c_n} = c_n).

    Exemplars are the fixed points of the labelling; with ``evidence``
    (the diagonal of r + a) only fixed points with positive evidence count.
    """
    N = len(exemplar_of)
    fixed = exemplar_of == np.arange(N)
    if evidence is not None:
        fixed &= evidence > 0
    exemplars = np.flatnonzero(fixed)
    if exemplars.size == 0:
        return None
    out = exemplar_of.copy()
    bad = ~np.isin(out, exemplars)
    if bad.any():
        sub = S[np.ix_(np.flatnonzero(bad), exemplars)]
        out[bad] = exemplars[np.argmax(sub, axis=1)]
    return out


def affinity_propagation(S, preference="median", damping=0.5, convergence_threshold=1e-6,
                         max_iter=1000, stable_iter=50, tie_break=1e-6) -> ClusteringResult:
    """Cluster from an ``N x N`` similarity matrix by message passing.

    Both messages start at zero. A sweep computes all responsibilities and
    then all availabilities from the previous sweep's values, each damped as
    ``new = damping * old + (1 - damping) * computed``. Stops when no message
    moved by more than ``convergence_threshold``, when the argmax labels
    were unchanged for ``stable_iter`` sweeps, or after ``max_iter`` sweeps.
    Argmax ties go to the smallest index.

    Exactly tied configurations (duplicated patterns, a preference equal to
    a pairwise similarity) make the messages oscillate between symmetric
    solutions. ``tie_break`` lowers preference k by
    ``tie_break * scale * k / N`` (``scale`` the largest similarity
    magnitude), a deterministic nudge toward lower-index exemplars. The
    reported objective uses the unperturbed preferences.
    """
    S = np.array(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] == 0:
        raise ValueError("similarity matrix must be square and non-empty")
    N = S.shape[0]
    pref = preferences(S, preference)
    S[np.diag_indices(N)] = pref
    if not np.all(np.isfinite(S)):
        raise ValueError("similarities and preferences must be finite")
    APConfig(None, damping, convergence_threshold, max_iter, stable_iter)

    if N == 1:
        ex = np.zeros(1, dtype=int)
        return ClusteringResult(ex, ex.copy(), 0, True, clustering_objective(S, ex, pref))
    S_obj = S.copy()
    if tie_break:
        scale = float(np.max(np.abs(S))) or 1.0
        S[np.diag_indices(N)] -= tie_break * scale * np.arange(N) / N

    rows = np.arange(N)
    diag = np.diag_indices(N)
    R = np.zeros((N, N))
    A = np.zeros((N, N))
    last = None
    stable = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # responsibilities: s(n,k) - max_{k' != k} (a + s)(n, k')
        AS = A + S
        first = np.argmax(AS, axis=1)
        top = AS[rows, first]
        AS[rows, first] = -np.inf
        second = np.max(AS, axis=1)
        Rnew = S - top[:, None]
        Rnew[rows, first] = S[rows, first] - second
        Rnew = damping * R + (1 - damping) * Rnew

        # availabilities from the positive support each candidate receives
        Rp = np.maximum(Rnew, 0)
        Rp[diag] = Rnew[diag]
        Anew = Rp.sum(axis=0)[None, :] - Rp
        self_avail = Anew[diag].copy()
        np.minimum(Anew, 0, out=Anew)
        Anew[diag] = self_avail
        Anew = damping * A + (1 - damping) * Anew

        delta = max(np.max(np.abs(Rnew - R)), np.max(np.abs(Anew - A)))
        R, A = Rnew, Anew

        labels = np.argmax(R + A, axis=1)
        if last is not None and np.array_equal(labels, last):
            stable += 1
        else:
            stable = 0
        last = labels
        if delta < convergence_threshold or stable >= stable_iter:
            converged = True
            break

    # A point labelling itself with r(k,k) + a(k,k) <= 0 has not been
    # elected: with very low preferences nothing is, and every point would
    # otherwise become its own exemplar.
    evidence = np.diag(R + A)
    exemplar_of = _finalize(S, last, evidence)
    if exemplar_of is None:
        k = int(np.argmax(evidence))
        exemplar_of = _finalize(S, np.where(rows == k, k, last))
    exemplars = np.unique(exemplar_of)
    return ClusteringResult(exemplar_of, exemplars, it, converged,
                            clustering_objective(S_obj, exemplar_of, pref))


def preference_for_n_clusters(S, n_clusters, *, max_steps=30, retry_damping=0.9, **ap_kwargs):
    """Search a shared scalar preference until AP yields ``n_clusters``.

    Starts from the smallest off-diagonal similarity, walks the lower end
    down (doubling the step) until AP returns at most ``n_clusters``, then
    bisects. Extremely negative preferences can make the messages
    oscillate; such runs are repeated with ``retry_damping``. Returns
    ``(preference, result)`` for the first exact hit, or the closest
    cluster count seen (ties toward the lower preference).
    """
    S = np.asarray(S, dtype=float)
    N = S.shape[0]
    if not 1 <= n_clusters <= N:
        raise ValueError(f"n_clusters must lie in [1, {N}]")
    off = S[~np.eye(N, dtype=bool)]
    if off.size == 0:
        return 0.0, affinity_propagation(S, 0.0, **ap_kwargs)
    span = float(off.max() - off.min()) or 1.0
    hi = float(off.max())
    best = None

    floor = float(off.min())
    damping = ap_kwargs.pop("damping", 0.5)

    def run(pref):
        nonlocal best
        res = affinity_propagation(S, pref, damping=damping, **ap_kwargs)
        # oscillating messages show up as non-convergence or, below the
        # smallest similarity, as every point claiming itself; retry slower
        if damping < retry_damping and (
                not res.converged or (pref < floor and res.n_clusters == N > 1)):
            res = affinity_propagation(S, pref, damping=retry_damping, **ap_kwargs)
        gap = abs(res.n_clusters - n_clusters)
        if best is None or gap < best[0] or (gap == best[0] and pref < best[1]):
            best = (gap, pref, res)
        return res.n_clusters

    lo, step, steps = float(off.min()), span, 0
    while steps < max_steps:
        steps += 1
        k = run(lo)
        if k == n_clusters:
            return best[1], best[2]
        if k < n_clusters:
            break
        hi = lo
        lo -= step
        step *= 2
    while steps < max_steps:
        steps += 1
        mid = 0.5 * (lo + hi)
        k = run(mid)
        if k == n_clusters:
            break
        if k > n_clusters:
            hi = mid
        else:
            lo = mid
    return best[1], best[2]


class SetAffinityPropagation(ClusterMixin, BaseEstimator):
    """Affinity propagation clustering of point patterns.

    Parameters
    ----------
    distance : {"ospa", "hausdorff", "wasserstein", "precomputed"}
        Set distance; with ``"precomputed"`` ``fit`` takes a distance matrix.
    p, cutoff, base :
        Order, OSPA cutoff and base metric (see :class:`DistanceSpec`).
    preference : "median", "min", float or array
        Exemplar preferences. Ignored when ``n_clusters`` is given.
    n_clusters : int, optional
        Search a shared preference that produces this many clusters.
    damping, convergence_threshold, max_iter, stable_iter :
        Message-passing controls.

    Attributes
    ----------
    labels_, cluster_centers_indices_, exemplar_of_, n_iter_, converged_,
    objective_, preference_, distances_
    """

    def __init__(self, distance="ospa", p=2.0, cutoff=None, base=None, preference="median",
                 n_clusters=None, damping=0.5, convergence_threshold=1e-6, max_iter=1000,
                 stable_iter=50, threads=None):
        self.distance = distance
        self.p = p
        self.cutoff = cutoff
        self.base = base
        self.preference = preference
        self.n_clusters = n_clusters
        self.damping = damping
        self.convergence_threshold = convergence_threshold
        self.max_iter = max_iter
        self.stable_iter = stable_iter
        self.threads = threads

    def fit(self, X, y=None):
        if self.distance == "precomputed":
            D = check_distance_matrix(X)
        else:
            spec = make_spec(self.distance, self.p, self.cutoff, self.base)
            D = pairwise_distances(as_patterns(X), spec=spec, threads=self.threads)
        S = similarities_from_distances(D)
        kw = dict(damping=self.damping, convergence_threshold=self.convergence_threshold,
                  max_iter=self.max_iter, stable_iter=self.stable_iter)
        if self.n_clusters is not None:
            pref, res = preference_for_n_clusters(S, self.n_clusters, **kw)
            self.preference_ = np.full(len(S), pref)
        else:
            self.preference_ = preferences(S, self.preference)
            res = affinity_propagation(S, self.preference_, **kw)
        self.distances_ = D
        self.result_ = res
        self.exemplar_of_ = res.exemplar_of
        self.cluster_centers_indices_ = res.exemplars
        self.labels_ = res.labels
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.objective_ = res.objective
        return self


def cluster_point_patterns(ds, spec: DistanceSpec, config: APConfig | None = None,
                           n_clusters=None, threads=None) -> ClusteringResult:
    """Distance matrix -> similarities -> preferences -> affinity propagation."""
    config = config or APConfig()
    if not isinstance(spec, DistanceSpec):
        raise SchemaError("spec must be a DistanceSpec")
    est = SetAffinityPropagation(spec.family, spec.p, spec.cutoff, spec.base,
                                 preference=config.preference, n_clusters=n_clusters,
                                 damping=config.damping,
                                 convergence_threshold=config.convergence_threshold,
                                 max_iter=config.max_iter, stable_iter=config.stable_iter,
                                 threads=threads)
    return est.fit(ds).result_

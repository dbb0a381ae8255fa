"""Set distances between point patterns: Hausdorff, Wasserstein and OSPA.

All three are metrics on finite (multi)sets. Hausdorff and Wasserstein are
undefined when either pattern is empty; OSPA is total, equal to the cutoff
``c`` when exactly one pattern is empty and 0 when both are.

The heavy lifting (assignment, transport, pairwise loops) lives in
:mod:`ppkit._kernels`.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import _kernels
from .base import BaseDistanceSpec
from .exceptions import EmptyPatternError, SchemaError
from .patterns import CATEGORICAL, LabeledDataset, PointPattern, as_patterns, format_real

FAMILIES = ("hausdorff", "wasserstein", "ospa")
_FAMILY_CODE = {"hausdorff": _kernels.HAUSDORFF, "wasserstein": _kernels.WASSERSTEIN,
                "ospa": _kernels.OSPA}


@dataclass(frozen=True)
class DistanceSpec:
    """Which set distance to use, with its order ``p`` and OSPA cutoff.

    ``base=None`` picks Euclidean for numeric patterns and the discrete
    metric for categorical ones.
    """

    family: str = "ospa"
    p: float = 2.0
    cutoff: float | None = None
    base: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown distance {self.family!r}; expected one of {FAMILIES}")
        if not self.p >= 1:
            raise ValueError(f"order p must be >= 1, got {self.p}")
        if self.family == "ospa":
            if self.cutoff is None:
                raise ValueError("the OSPA distance needs a cutoff c > 0")
            if not self.cutoff > 0 or not np.isfinite(self.cutoff):
                raise ValueError(f"cutoff must be a positive real, got {self.cutoff}")
        if self.base is not None:
            BaseDistanceSpec(self.base)
        object.__setattr__(self, "p", float(self.p))
        if self.cutoff is not None:
            object.__setattr__(self, "cutoff", float(self.cutoff))

    def resolve_base(self, kind):
        return resolve_base(self.base, kind)

    @property
    def allows_empty(self):
        return self.family == "ospa"

    def to_dict(self):
        return {"family": self.family, "p": self.p, "cutoff": self.cutoff, "base": self.base}


def resolve_base(base, kind):
    if base is None:
        return "discrete" if kind == CATEGORICAL else "euclidean"
    if base == "euclidean" and kind == CATEGORICAL:
        raise SchemaError("euclidean base distance needs numeric elements")
    return base


def _as_pattern(x, name):
    if isinstance(x, PointPattern):
        return x
    return PointPattern(x, id=name)


class _Encoder:
    """Maps patterns to kernel-ready float arrays (tokens -> integer codes)."""

    def __init__(self, patterns):
        kinds = {p.kind for p in patterns if len(p)}
        if len(kinds) > 1:
            raise SchemaError("cannot compare numeric and categorical patterns")
        dims = {p.dim for p in patterns if len(p) and p.dim is not None}
        if len(dims) > 1:
            raise SchemaError(f"patterns have different dimensions {sorted(dims)}")
        self.kind = kinds.pop() if kinds else "numeric"
        self.dim = dims.pop() if dims else 1
        self.vocab = {}
        if self.kind == CATEGORICAL:
            for p in patterns:
                for t in p.points:
                    self.vocab.setdefault(t, len(self.vocab))

    def array(self, p):
        if len(p) == 0:
            return np.empty((0, 1 if self.kind == CATEGORICAL else self.dim))
        if self.kind == CATEGORICAL:
            return np.array([[self.vocab[t]] for t in p.points], dtype=float)
        return np.ascontiguousarray(p.points, dtype=float)

    def pack(self, patterns):
        arrays = [self.array(p) for p in patterns]
        width = 1 if self.kind == CATEGORICAL else self.dim
        offsets = np.zeros(len(arrays) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(a) for a in arrays])
        coords = np.concatenate(arrays) if arrays else np.empty((0, width))
        return np.ascontiguousarray(coords.reshape(-1, width)), offsets


def _pair(X, Y, base):
    X, Y = _as_pattern(X, "X"), _as_pattern(Y, "Y")
    enc = _Encoder([X, Y])
    code = BaseDistanceSpec(resolve_base(base, enc.kind)).code
    return enc.array(X), enc.array(Y), code, X, Y


def _require_nonempty(X, Y, name):
    for arg, pat in (("X", X), ("Y", Y)):
        if len(pat) == 0:
            raise EmptyPatternError(
                f"{name} distance is undefined for an empty pattern (argument {arg})", which=arg)


def hausdorff(X, Y, base=None) -> float:
    """Largest distance from a point of either pattern to the other pattern."""
    a, b, code, X, Y = _pair(X, Y, base)
    _require_nonempty(X, Y, "Hausdorff")
    return float(_kernels.hausdorff(a, b, code))


def wasserstein(X, Y, p=2.0, base=None) -> float:
    """Order-``p`` optimal transport between uniform masses on X and Y."""
    if not p >= 1:
        raise ValueError("order p must be >= 1")
    a, b, code, X, Y = _pair(X, Y, base)
    _require_nonempty(X, Y, "Wasserstein")
    return float(_kernels.wasserstein(a, b, code, float(p)))


def ospa(X, Y, p=2.0, c=1.0, base=None) -> float:
    """OSPA distance of order ``p`` and cutoff ``c``; always in ``[0, c]``."""
    if not p >= 1:
        raise ValueError("order p must be >= 1")
    if not c > 0:
        raise ValueError("cutoff c must be positive")
    a, b, code, _, _ = _pair(X, Y, base)
    return float(_kernels.ospa(a, b, code, float(p), float(c)))


def ospa_decompose(X, Y, p=2.0, base=None):
    """Split an uncapped OSPA comparison into (cardinality, feature) parts.

    With m <= n the two cardinalities, returns ``((n - m) / n, cost / n)``
    where ``cost`` is the optimal assignment cost of the m smaller-side
    elements using uncapped ``d ** p``. When every pairwise base distance is
    below ``c`` the optimal assignment is shared, so
    ``ospa(X, Y, p, c) ** p == c ** p * card + feat``.
    """
    a, b, code, X, Y = _pair(X, Y, base)
    if len(X) == 0 and len(Y) == 0:
        raise EmptyPatternError("decomposition is undefined for two empty patterns",
                                which="X,Y")
    card, feat = _kernels.ospa_decompose(a, b, code, float(p))
    return float(card), float(feat)


def _check_cost(cost):
    C = np.array(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] == 0 or C.shape[1] == 0:
        raise ValueError("cost must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise ValueError("cost entries must be finite and non-negative")
    return np.ascontiguousarray(C)


def solve_assignment(cost):
    """Optimal injective assignment of rows to columns (needs rows <= cols).

    Returns ``(cols, total)`` where ``cols[i]`` is the column given to row i.
    """
    C = _check_cost(cost)
    if C.shape[0] > C.shape[1]:
        raise ValueError(f"assignment needs rows <= cols, got shape {C.shape}")
    cols, total = _kernels.assignment(C)
    return cols, float(total)


def solve_transport(cost):
    """Optimal plan between uniform row masses 1/m and column masses 1/n.

    Returns ``(plan, total)``; ``plan`` rows sum to 1/m and columns to 1/n.
    """
    C = _check_cost(cost)
    m, n = C.shape
    flow, total = _kernels.transport(C)
    return flow / (m * n), float(total)


@dataclass
class DistanceMatrix:
    """Pairwise distances with the ids of the patterns in row order."""

    values: np.ndarray
    ids: list = field(default_factory=list)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self) -> str:
        return "".join(",".join(format_real(v) for v in row) + "\n"
                       for row in self.values.tolist())

    def save(self, path):
        """Write ``path`` (CSV, no header) and ``path + '.ids.json'``."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())
        with open(str(path) + ".ids.json", "w", encoding="utf-8") as fh:
            json.dump({"ids": list(self.ids)}, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        values = np.loadtxt(path, delimiter=",", ndmin=2)
        ids = []
        if os.path.exists(str(path) + ".ids.json"):
            with open(str(path) + ".ids.json", encoding="utf-8") as fh:
                ids = json.load(fh)["ids"]
        return cls(values, ids)


def default_threads():
    env = os.environ.get("PPKIT_THREADS")
    return max(1, int(env)) if env else 1


def _check_empty(patterns, spec):
    if spec.allows_empty:
        return
    empty = [p.id for p in patterns if len(p) == 0]
    if empty:
        raise EmptyPatternError(
            f"{spec.family} distance is undefined for empty patterns: {', '.join(empty)}",
            which=empty)


def pairwise_distances(X, Y=None, spec: DistanceSpec | None = None, *, progress=None,
                       threads=None) -> np.ndarray:
    """Distances between every pattern of ``X`` and every pattern of ``Y``.

    With ``Y=None`` the symmetric matrix over ``X`` is returned (zero
    diagonal, upper triangle computed once and mirrored). ``progress`` is
    called as ``progress(done_rows, total_rows)``. Entries are independent,
    so the result does not depend on ``threads``.
    """
    spec = spec or DistanceSpec()
    A = as_patterns(X)
    B = A if Y is None else as_patterns(Y)
    enc = _Encoder(A if Y is None else A + B)
    _check_empty(A if Y is None else A + B, spec)
    base = BaseDistanceSpec(spec.resolve_base(enc.kind)).code
    coords, offsets = enc.pack(A)
    if Y is None:
        bcoords, boffsets = coords, offsets
    else:
        bcoords, boffsets = enc.pack(B)
    out = np.zeros((len(A), len(B)))
    family = _FAMILY_CODE[spec.family]
    c = spec.cutoff if spec.cutoff is not None else 0.0
    threads = threads or default_threads()
    n_rows = len(A)

    # interleaved row blocks balance the shrinking upper-triangle rows
    block = 16
    chunks = [np.arange(s, min(s + block, n_rows), dtype=np.int64)
              for s in range(0, n_rows, block)]

    def work(rows):
        _kernels.distance_rows(coords, offsets, rows, bcoords, boffsets, family, base,
                               spec.p, c, Y is None, out)
        return len(rows)

    done = 0
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for k in pool.map(work, chunks):
                done += k
                if progress:
                    progress(done, n_rows)
    else:
        for rows in chunks:
            done += work(rows)
            if progress:
                progress(done, n_rows)
    if Y is None:
        iu = np.triu_indices(n_rows, 1)
        out[(iu[1], iu[0])] = out[iu]
    return out


def distance_matrix(ds, spec: DistanceSpec, progress=None, threads=None) -> DistanceMatrix:
    """Symmetric distance matrix over a dataset, tagged with pattern ids."""
    patterns = as_patterns(ds)
    values = pairwise_distances(patterns, spec=spec, progress=progress, threads=threads)
    return DistanceMatrix(values, [p.id for p in patterns])


def set_distance(X, Y, spec: DistanceSpec) -> float:
    """Distance between two patterns as selected by ``spec``."""
    if spec.family == "hausdorff":
        return hausdorff(X, Y, base=spec.base)
    if spec.family == "wasserstein":
        return wasserstein(X, Y, p=spec.p, base=spec.base)
    return ospa(X, Y, p=spec.p, c=spec.cutoff, base=spec.base)


class SetDistanceTransformer(TransformerMixin, BaseEstimator):
    """Embeds patterns as their distances to the fitted reference patterns."""

    def __init__(self, distance="ospa", p=2.0, cutoff=None, base=None, threads=None):
        self.distance = distance
        self.p = p
        self.cutoff = cutoff
        self.base = base
        self.threads = threads

    def fit(self, X, y=None):
        spec = self.distance
        if not isinstance(spec, DistanceSpec):
            spec = DistanceSpec(spec, self.p, self.cutoff, self.base)
        self.spec_ = spec
        self.reference_ = as_patterns(X)
        if not self.reference_:
            raise SchemaError("need at least one reference pattern")
        return self

    def transform(self, X):
        return pairwise_distances(as_patterns(X), self.reference_, spec=self.spec_,
                                  threads=self.threads)

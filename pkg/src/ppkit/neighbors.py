"""k-nearest-neighbour classification of point patterns and OSPA cutoff learning.

Cutoff learning scores a candidate ``c`` by how tight each class is relative
to its separation from the other classes. For a pattern X and a collection
C, let ``dbar(X, C)`` be the mean OSPA distance from X to its k nearest
members of C (X itself excluded). For class l::

    spread(l)     = max_{X in C_l} dbar(X, C_l)
    separation(l) = min_{j != l} min_{X in C_l} dbar(X, C_j)

and ``rho(c)`` is the worst-case (max over classes) or average ratio
spread / separation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .distances import DistanceSpec, pairwise_distances
from .exceptions import DegenerateError, SchemaError
from .metrics import kfold
from .patterns import LabeledDataset, as_patterns
from .validation import check_distance_matrix, check_labels, make_spec


def vote(dist_row, y_train, k):
    """Majority label among the ``k`` nearest; see :class:`KNeighborsPatternClassifier`."""
    order = np.argsort(dist_row, kind="stable")[:k]
    labs = y_train[order]
    values, counts = np.unique(labs, return_counts=True)
    tied = set(values[counts == counts.max()].tolist())
    for lab in labs:  # nearest-first, so the first tied label has the closest member
        if lab.item() in tied:
            return lab
    raise AssertionError("unreachable")


def predict_from_distances(D, y_train, k):
    """Labels for each row of a (queries x training) distance matrix."""
    y_train = np.asarray(y_train)
    return np.array([vote(row, y_train, k) for row in np.asarray(D)])


class KNeighborsPatternClassifier(ClassifierMixin, BaseEstimator):
    """k-NN classifier over a set distance.

    Neighbours tied at the k-th distance are taken in training order; a
    tied vote goes to the label whose nearest neighbour is closest.
    With ``distance="precomputed"``, ``fit`` takes the training distance
    matrix (only its size is used) and ``predict`` a (queries x training)
    matrix.
    """

    def __init__(self, n_neighbors=1, distance="ospa", p=2.0, cutoff=None, base=None,
                 threads=None):
        self.n_neighbors = n_neighbors
        self.distance = distance
        self.p = p
        self.cutoff = cutoff
        self.base = base
        self.threads = threads

    def fit(self, X, y=None):
        if y is None:
            if not isinstance(X, LabeledDataset) or X.labels is None:
                raise SchemaError("training labels are required")
            y = X.y
        if self.distance == "precomputed":
            n = check_distance_matrix(X, square=False).shape[0]
            self.train_ = None
        else:
            self.spec_ = make_spec(self.distance, self.p, self.cutoff, self.base)
            self.train_ = as_patterns(X)
            n = len(self.train_)
        self.y_ = check_labels(y, n)
        self.classes_ = np.unique(self.y_)
        if not 1 <= self.n_neighbors <= n:
            raise ValueError(f"n_neighbors must lie in [1, {n}]")
        return self

    def _distances(self, X):
        if self.distance == "precomputed":
            return check_distance_matrix(X, square=False)
        return pairwise_distances(as_patterns(X), self.train_, spec=self.spec_,
                                  threads=self.threads)

    def kneighbors(self, X):
        D = self._distances(X)
        order = np.argsort(D, axis=1, kind="stable")[:, :self.n_neighbors]
        return np.take_along_axis(D, order, axis=1), order

    def predict(self, X):
        return predict_from_distances(self._distances(X), self.y_, self.n_neighbors)


@dataclass
class KnnModel:
    train: LabeledDataset
    spec: DistanceSpec
    k: int = 1

    def __post_init__(self):
        if self.train.labels is None:
            raise SchemaError("training set must be labelled")
        if not 1 <= self.k <= len(self.train):
            raise ValueError(f"k must lie in [1, {len(self.train)}]")


def knn_classify(model: KnnModel, query):
    D = pairwise_distances([query], model.train.patterns, spec=model.spec)
    return vote(D[0], model.train.y, model.k).item()


def cv_predictions(D, y, k, folds):
    """Out-of-fold predictions from a full symmetric distance matrix."""
    y = np.asarray(y)
    pred = np.empty_like(y)
    N = len(y)
    for test in folds:
        train = np.setdiff1d(np.arange(N), test)
        pred[test] = predict_from_distances(D[np.ix_(test, train)], y[train], k)
    return pred


def cv_accuracy(D, y, k, folds):
    """Per-fold accuracies of k-NN under the given test folds."""
    y = np.asarray(y)
    pred = cv_predictions(D, y, k, folds)
    return [float(np.mean(pred[f] == y[f])) for f in folds]


AGGREGATIONS = ("worst_case", "average", "mean")


def class_dissimilarities(D, y, k=1, reduce="extreme"):
    """Per-class (spread, separation) from a symmetric distance matrix.

    ``reduce="extreme"`` takes the max/min over members and other classes
    as in the module docstring; ``"mean"`` averages instead. Returns
    ``{label: (spread, separation)}``.
    """
    if reduce not in ("extreme", "mean"):
        raise ValueError(f"unknown reduction {reduce!r}")
    D = check_distance_matrix(D)
    y = check_labels(y, D.shape[0])
    classes = np.unique(y)
    if len(classes) < 2:
        raise SchemaError("need at least two classes")
    members = {lab: np.flatnonzero(y == lab) for lab in classes}
    for lab, idx in members.items():
        if len(idx) < k + 1:
            raise SchemaError(f"class {lab} has {len(idx)} members; need at least k+1 = {k + 1}")
    out = {}
    for lab in classes:
        idx = members[lab]
        within = D[np.ix_(idx, idx)].copy()
        np.fill_diagonal(within, np.inf)
        spreads = np.sort(within, axis=1)[:, :k].mean(axis=1)
        seps = [np.sort(D[np.ix_(idx, members[o])], axis=1)[:, :k].mean(axis=1)
                for o in classes if o != lab]
        if reduce == "extreme":
            out[lab.item()] = (float(spreads.max()), float(min(s.min() for s in seps)))
        else:
            out[lab.item()] = (float(spreads.mean()), float(np.mean([s.mean() for s in seps])))
    return out


def rho_from_distances(D, y, k=1, aggregation="worst_case"):
    """``worst_case``: max over classes of spread/separation. ``average``:
    mean of the same ratios. ``mean``: every max and min replaced by a
    mean (members, other classes and classes)."""
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}")
    diss = class_dissimilarities(D, y, k, "mean" if aggregation == "mean" else "extreme")
    ratios = []
    for lab, (spread, sep) in diss.items():
        if sep == 0:
            raise DegenerateError(f"class {lab} is not separated from another class (distance 0)")
        ratios.append(spread / sep)
    if aggregation == "worst_case":
        return float(max(ratios))
    return float(np.mean(ratios))


def rho(train: LabeledDataset, c, p=2.0, k=1, aggregation="worst_case", base=None,
        threads=None):
    """Spread-to-separation ratio of the OSPA distance with cutoff ``c``."""
    D = pairwise_distances(train, spec=DistanceSpec("ospa", p, c, base), threads=threads)
    return rho_from_distances(D, train.y, k, aggregation)


def element_distance_sample(patterns, max_points=3000, seed=0):
    """Pairwise base distances between pooled elements (subsampled)."""
    patterns = as_patterns(patterns)
    pts = [p.points for p in patterns if len(p)]
    if not pts:
        raise SchemaError("all patterns are empty")
    if patterns and any(p.kind == "categorical" for p in patterns if len(p)):
        tokens = [t for p in patterns for t in p.points]
        return np.array([0.0, 1.0]) if len(set(tokens)) > 1 else np.array([0.0])
    P = np.concatenate(pts)
    if len(P) > max_points:
        P = P[np.random.default_rng(seed).choice(len(P), max_points, replace=False)]
    diff = P[:, None, :] - P[None, :, :]
    D = np.sqrt((diff ** 2).sum(-1))
    return D[np.triu_indices(len(P), 1)]


def default_cutoff_grid(train, n=20):
    """Log-spaced cutoffs from the 5th percentile of non-zero element
    distances up to twice the largest one."""
    d = element_distance_sample(train)
    nz = d[d > 0]
    if nz.size == 0:
        raise DegenerateError("all elements coincide; no scale for a cutoff grid")
    lo, hi = float(np.percentile(nz, 5)), 2.0 * float(nz.max())
    return np.geomspace(lo, hi, n)


@dataclass
class CutoffSearchConfig:
    grid: object = None
    p: float = 2.0
    k: int = 1
    aggregation: str = "worst_case"

    def __post_init__(self):
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=float)
            if g.ndim != 1 or g.size == 0 or np.any(g <= 0) or not np.all(np.isfinite(g)):
                raise ValueError("cutoff grid must be a non-empty list of positive reals")
            if np.any(np.diff(g) <= 0):
                raise ValueError("cutoff grid must be strictly ascending")


def learn_cutoff(train: LabeledDataset, cfg: CutoffSearchConfig | None = None, base=None,
                 threads=None, return_scores=False):
    """Grid value of ``c`` minimising rho (ties toward the smaller ``c``)."""
    cfg = cfg or CutoffSearchConfig()
    grid = default_cutoff_grid(train) if cfg.grid is None else np.asarray(cfg.grid, float)
    scores = []
    for c in grid:
        try:
            scores.append(rho(train, c, cfg.p, cfg.k, cfg.aggregation, base, threads))
        except DegenerateError:
            scores.append(np.inf)
    scores = np.array(scores)
    if not np.any(np.isfinite(scores)):
        raise DegenerateError("every grid cutoff gives a degenerate class separation")
    best = float(grid[int(np.argmin(scores))])
    return (best, grid, scores) if return_scores else best


def select_cutoff_cv(train: LabeledDataset, grid, p=2.0, k=1, n_folds=10, seed=0,
                     base=None, threads=None):
    """Grid value of ``c`` with the best mean k-NN cross-validation accuracy."""
    folds = kfold(train.y, n_folds, seed=seed, stratified=True)
    best, best_acc = None, -1.0
    for c in np.asarray(grid, dtype=float):
        D = pairwise_distances(train, spec=DistanceSpec("ospa", p, c, base), threads=threads)
        acc = float(np.mean(cv_accuracy(D, train.y, k, folds)))
        if acc > best_acc:
            best, best_acc = float(c), acc
    return best

"""Nearest-normal-neighbour (NNN) novelty detection.

A candidate is scored by its distance to the closest pattern of a normal
training set and flagged novel when that score is strictly above a
threshold. The threshold is a percentile (linear interpolation between
order statistics, numpy's default) of the leave-one-out NNN distances of
the normal patterns themselves.

For OSPA the cutoff can be derived from the normal set: with ``m_card`` and
``m_feat`` large percentiles of the cardinality and feature parts of the
uncapped comparison (see :func:`ppkit.distances.ospa_decompose`),
``c = (m_feat / m_card) ** (1 / p)`` weighs a typical cardinality gap the
same as a typical feature mismatch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin

from . import _kernels
from .base import BaseDistanceSpec
from .distances import DistanceSpec, _Encoder, pairwise_distances
from .exceptions import DegenerateError, SchemaError
from .patterns import LabeledDataset, as_patterns
from .validation import check_percentile, make_spec

SCORINGS = ("distance", "uncapped-ospa")


def _normal_patterns(normal, minimum=1):
    pats = as_patterns(normal)
    if len(pats) < minimum:
        raise SchemaError(f"need at least {minimum} normal pattern(s), got {len(pats)}")
    return pats


def decompose_pairs(X, Y=None, p=2.0, base=None):
    """Cardinality and feature parts of the uncapped comparison, pairwise.

    Returns two matrices shaped like :func:`pairwise_distances`. Two empty
    patterns give zeros in both.
    """
    if not p >= 1:
        raise ValueError("order p must be >= 1")
    A = as_patterns(X)
    B = A if Y is None else as_patterns(Y)
    enc = _Encoder(A if Y is None else A + B)
    code = BaseDistanceSpec(DistanceSpec("hausdorff", base=base).resolve_base(enc.kind)).code
    coords, offsets = enc.pack(A)
    bcoords, boffsets = (coords, offsets) if Y is None else enc.pack(B)
    card = np.zeros((len(A), len(B)))
    feat = np.zeros((len(A), len(B)))
    _kernels.decompose_rows(coords, offsets, np.arange(len(A), dtype=np.int64), bcoords,
                            boffsets, code, float(p), Y is None, card, feat)
    if Y is None:
        iu = np.triu_indices(len(A), 1)
        card[(iu[1], iu[0])] = card[iu]
        feat[(iu[1], iu[0])] = feat[iu]
    return card, feat


def select_cutoff(normal, p=2.0, q_m=95.0, base=None):
    """OSPA cutoff ``(m_feat / m_card) ** (1 / p)`` from a normal set."""
    q_m = check_percentile(q_m)
    pats = _normal_patterns(normal, 2)
    card, feat = decompose_pairs(pats, p=p, base=base)
    sizes = np.array([len(x) for x in pats])
    iu = np.triu_indices(len(pats), 1)
    keep = (sizes[iu[0]] > 0) | (sizes[iu[1]] > 0)
    if not np.any(keep):
        raise DegenerateError("every normal pattern is empty")
    m_card = float(np.percentile(card[iu][keep], q_m))
    m_feat = float(np.percentile(feat[iu][keep], q_m))
    if m_card == 0:
        raise DegenerateError("normal patterns show no cardinality variation (m_card = 0)")
    if m_feat == 0:
        raise DegenerateError("normal patterns show no feature variation (m_feat = 0)")
    return (m_feat / m_card) ** (1.0 / p)


def _uncapped_scores(query, normal, p, base, ratio):
    card, feat = decompose_pairs(query, normal, p=p, base=base)
    return (ratio * card + feat) ** (1.0 / p)


def nnn_distance(normal, T, spec: DistanceSpec) -> float:
    """Distance from ``T`` to its nearest normal neighbour."""
    pats = _normal_patterns(normal)
    return float(pairwise_distances([T], pats, spec=spec)[0].min())


def loo_nnn_distances(normal, spec: DistanceSpec, threads=None):
    pats = _normal_patterns(normal, 2)
    D = pairwise_distances(pats, spec=spec, threads=threads)
    np.fill_diagonal(D, np.inf)
    return D.min(axis=1)


def fit_threshold(normal, spec: DistanceSpec, q=95.0, threads=None) -> float:
    """``q``-th percentile of the leave-one-out NNN distances of the normals."""
    q = check_percentile(q)
    return float(np.percentile(loo_nnn_distances(normal, spec, threads), q))


@dataclass
class NoveltyModel:
    normal: LabeledDataset
    spec: DistanceSpec
    threshold: float

    def __post_init__(self):
        if len(self.normal) == 0:
            raise SchemaError("normal set is empty")
        if not self.threshold >= 0:
            raise ValueError("threshold must be non-negative")


def fit_novelty(normal, spec: DistanceSpec, q=95.0, threads=None) -> NoveltyModel:
    ds = normal if isinstance(normal, LabeledDataset) else LabeledDataset(as_patterns(normal))
    return NoveltyModel(ds, spec, fit_threshold(ds, spec, q, threads))


def detect(model: NoveltyModel, candidates, threads=None):
    """Per-candidate ``{id, score, threshold, novel}``; novel iff score > threshold."""
    cands = as_patterns(candidates)
    scores = pairwise_distances(cands, model.normal.patterns, spec=model.spec,
                                threads=threads).min(axis=1)
    return [{"id": c.id, "score": float(s), "threshold": float(model.threshold),
             "novel": bool(s > model.threshold)} for c, s in zip(cands, scores)]


def report_lines(rows) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)


class NNNoveltyDetector(OutlierMixin, BaseEstimator):
    """Nearest-normal-neighbour novelty detector.

    ``cutoff="auto"`` (OSPA only) derives the cutoff from the normal set
    with :func:`select_cutoff`. ``scoring="uncapped-ospa"`` scores by
    ``((m_feat / m_card) * d_card + d_feat) ** (1 / p)`` against the
    nearest normal pattern instead of the plain set distance.

    ``predict`` follows the scikit-learn outlier convention: ``1`` for
    normal, ``-1`` for novel.
    """

    def __init__(self, distance="ospa", p=2.0, cutoff="auto", base=None, percentile=95.0,
                 cutoff_percentile=95.0, scoring="distance", threads=None):
        self.distance = distance
        self.p = p
        self.cutoff = cutoff
        self.base = base
        self.percentile = percentile
        self.cutoff_percentile = cutoff_percentile
        self.scoring = scoring
        self.threads = threads

    def fit(self, X, y=None):
        if self.scoring not in SCORINGS:
            raise ValueError(f"scoring must be one of {SCORINGS}, got {self.scoring!r}")
        self.normal_ = _normal_patterns(X, 2)
        q = check_percentile(self.percentile)
        if self.scoring == "uncapped-ospa":
            c = select_cutoff(self.normal_, self.p, self.cutoff_percentile, self.base)
            self.cutoff_ = c
            self.ratio_ = c ** self.p
            S = _uncapped_scores(self.normal_, None, self.p, self.base, self.ratio_)
            np.fill_diagonal(S, np.inf)
            loo = S.min(axis=1)
            self.spec_ = None
        else:
            cutoff = self.cutoff
            if self.distance == "ospa" and cutoff == "auto":
                cutoff = select_cutoff(self.normal_, self.p, self.cutoff_percentile, self.base)
            elif cutoff == "auto":
                cutoff = None
            self.cutoff_ = cutoff
            self.spec_ = make_spec(self.distance, self.p, cutoff, self.base)
            loo = loo_nnn_distances(self.normal_, self.spec_, self.threads)
        self.threshold_ = float(np.percentile(loo, q))
        return self

    def score_samples(self, X):
        """NNN scores; larger means further from the normal set."""
        cands = as_patterns(X)
        if self.scoring == "uncapped-ospa":
            S = _uncapped_scores(cands, self.normal_, self.p, self.base, self.ratio_)
        else:
            S = pairwise_distances(cands, self.normal_, spec=self.spec_, threads=self.threads)
        return S.min(axis=1)

    def decision_function(self, X):
        return self.threshold_ - self.score_samples(X)

    def predict(self, X):
        return np.where(self.score_samples(X) > self.threshold_, -1, 1)

    def detect(self, X):
        cands = as_patterns(X)
        scores = self.score_samples(cands)
        return [{"id": c.id, "score": float(s), "threshold": self.threshold_,
                 "novel": bool(s > self.threshold_)} for c, s in zip(cands, scores)]

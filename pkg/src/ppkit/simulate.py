"""Synthetic point patterns from Poisson point processes with Gaussian intensity.

A pattern is drawn by sampling its cardinality from ``Poisson(rate)`` and
then that many i.i.d. points from ``N(mean, cov)``.

Random streams: a scenario seed feeds ``numpy.random.SeedSequence`` and
cluster ``k`` draws from the ``k``-th spawned child with the PCG64
generator, so each cluster's patterns depend only on (seed, k) and not on
the order in which clusters are generated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SchemaError
from .patterns import LabeledDataset, PointPattern


@dataclass(frozen=True)
class PPPSpec:
    rate: float
    mean: tuple
    cov: tuple = ((1.0, 0.0), (0.0, 1.0))

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("Poisson rate must be positive")
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be a d-vector and cov a d x d matrix")
        if not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None
        object.__setattr__(self, "mean", tuple(mean.tolist()))
        object.__setattr__(self, "cov", tuple(map(tuple, cov.tolist())))

    @property
    def chol(self):
        return np.linalg.cholesky(np.asarray(self.cov))

    def to_dict(self):
        return {"rate": self.rate, "mean": list(self.mean), "cov": [list(r) for r in self.cov]}


@dataclass(frozen=True)
class ClusterSpec:
    ppp: PPPSpec
    count: int = 200

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("cluster count must be positive")


@dataclass(frozen=True)
class ScenarioSpec:
    clusters: tuple
    seed: int = 0
    name: str = "scenario"

    def to_dict(self):
        return {
            "name": self.name,
            "seed": int(self.seed),
            "clusters": [dict(c.ppp.to_dict(), count=c.count) for c in self.clusters],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            clusters = tuple(
                ClusterSpec(PPPSpec(c["rate"], tuple(c["mean"]),
                                    tuple(map(tuple, c.get("cov", [[1, 0], [0, 1]])))),
                            int(c.get("count", 200)))
                for c in d["clusters"])
            return cls(clusters, int(d.get("seed", 0)), d.get("name", "scenario"))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad scenario config: {exc}") from None

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def sample_ppp(spec: PPPSpec, rng: np.random.Generator, id="") -> PointPattern:
    n = int(rng.poisson(spec.rate))
    z = rng.standard_normal((n, len(spec.mean)))
    pts = np.asarray(spec.mean) + z @ spec.chol.T
    return PointPattern(pts, id=id)


def cluster_streams(seed, n_clusters):
    children = np.random.SeedSequence(int(seed)).spawn(n_clusters)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def generate(spec: ScenarioSpec) -> LabeledDataset:
    """Draw every cluster of ``spec``; labels are the 1-based cluster numbers."""
    patterns, labels = [], []
    rngs = cluster_streams(spec.seed, len(spec.clusters))
    for k, (cl, rng) in enumerate(zip(spec.clusters, rngs), start=1):
        for i in range(cl.count):
            patterns.append(sample_ppp(cl.ppp, rng, id=f"{spec.name}-c{k}-{i:04d}"))
            labels.append(k)
    return LabeledDataset(patterns, labels, dim=len(spec.clusters[0].ppp.mean))


# Calibrated defaults as (rate, mean, isotropic variance);
# cluster 2 is the "normal" class in novelty runs.
SCENARIO_PARAMS = {
    # well separated in feature, overlapping in cardinality
    "i": [(10.0, (0.0, 0.0), 1.0), (10.0, (10.0, 0.0), 1.0), (10.0, (5.0, 8.0), 1.0)],
    # shared feature distribution, well separated cardinalities
    "ii": [(5.0, (5.0, 4.0), 1.0), (15.0, (5.0, 4.0), 1.0), (30.0, (5.0, 4.0), 1.0)],
    # clusters 1 and 3 differ only in cardinality; cluster 2 differs in feature
    "iii": [(15.0, (0.0, 0.0), 4.0), (15.0, (8.0, 0.0), 4.0), (30.0, (0.0, 0.0), 4.0)],
}


def default_scenario(name: str, seed: int = 0, count: int = 200) -> ScenarioSpec:
    if name not in SCENARIO_PARAMS:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIO_PARAMS)}")
    clusters = tuple(ClusterSpec(PPPSpec(rate, mean, ((var, 0.0), (0.0, var))), count)
                     for rate, mean, var in SCENARIO_PARAMS[name])
    return ScenarioSpec(clusters, seed, name)


def generate_scenarios(seed: int = 0, count: int = 200) -> dict:
    """The three benchmark datasets ``{"i": ..., "ii": ..., "iii": ...}``."""
    return {name: generate(default_scenario(name, seed, count)) for name in SCENARIO_PARAMS}

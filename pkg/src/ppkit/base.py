"""Element-level (base) distances.

Numeric elements use the Euclidean metric. Categorical elements (e.g. WiFi
access-point ids) use the discrete metric, 0 for equal tokens and 1
otherwise; with an OSPA cutoff ``c >= 1`` the set distance then behaves as
a normalised set-difference count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

KINDS = ("euclidean", "discrete")


@dataclass(frozen=True)
class BaseDistanceSpec:
    kind: str = "euclidean"
    cap: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown base distance {self.kind!r}; expected one of {KINDS}")
        if self.cap is not None and not self.cap > 0:
            raise ValueError("cap must be positive")

    @property
    def code(self):
        return _kernels.EUCLIDEAN if self.kind == "euclidean" else _kernels.DISCRETE

    def __call__(self, x, y):
        d = euclidean(x, y) if self.kind == "euclidean" else discrete(x, y)
        return d if self.cap is None else capped(d, self.cap)


def euclidean(x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return float(np.sqrt(np.sum((x - y) ** 2)))


def discrete(a, b) -> float:
    return 0.0 if a == b else 1.0


def capped(d: float, c: float) -> float:
    if not c > 0:
        raise ValueError("cutoff must be positive")
    return min(c, d)

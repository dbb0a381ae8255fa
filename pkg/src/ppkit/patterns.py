"""Point patterns, labelled datasets and the JSON-lines dataset format.

A point pattern is a finite multiset whose elements are either real vectors
of a common dimension or categorical tokens. A dataset file holds one JSON
object per line::

    {"id": "a", "label": 1, "points": [[0.0, 1.5], [2.0, 3.0]]}
    {"id": "b", "points": ["ap1", "ap7"]}

``label`` is optional (an integer >= 1); ``points`` may be empty.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ParseError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"


def _freeze(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A finite multiset of elements.

    ``points`` is an ``(m, d)`` float array for numeric patterns or a tuple
    of strings for categorical ones. Element order is kept for storage but
    carries no meaning: equality is multiset equality.
    """

    points: np.ndarray | tuple
    id: str = ""

    def __post_init__(self):
        pts = self.points
        if isinstance(pts, tuple) and all(isinstance(t, str) for t in pts) and pts:
            return
        if isinstance(pts, (list, tuple)) and pts and all(isinstance(t, str) for t in pts):
            object.__setattr__(self, "points", tuple(pts))
            return
        arr = np.array(pts, dtype=float)
        if arr.size == 0:
            arr = arr.reshape(0, arr.shape[1] if arr.ndim == 2 else 0)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise SchemaError(f"pattern {self.id!r}: points must be a list of vectors")
        if not np.all(np.isfinite(arr)):
            raise SchemaError(f"pattern {self.id!r}: non-finite coordinate")
        object.__setattr__(self, "points", _freeze(arr))

    @property
    def kind(self):
        return CATEGORICAL if isinstance(self.points, tuple) else NUMERIC

    @property
    def dim(self):
        """Element dimension, or None for empty/categorical patterns."""
        if self.kind == CATEGORICAL or len(self.points) == 0:
            return None
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def _canonical(self):
        if self.kind == CATEGORICAL:
            return sorted(self.points)
        return sorted(map(tuple, self.points.tolist()))

    def __eq__(self, other):
        if not isinstance(other, PointPattern):
            return NotImplemented
        if len(self) != len(other):
            return False
        if len(self) and self.kind != other.kind:
            return False
        return self.id == other.id and self._canonical() == other._canonical()

    def __hash__(self):
        return hash((self.id, len(self)))

    def __repr__(self):
        return f"PointPattern(id={self.id!r}, n={len(self)}, kind={self.kind})"


@dataclass(frozen=True)
class LabeledDataset:
    """Point patterns with optional aligned class labels."""

    patterns: tuple
    labels: tuple | None = None
    kind: str = NUMERIC
    dim: int | None = field(default=None)

    def __post_init__(self):
        pats = tuple(p if isinstance(p, PointPattern) else PointPattern(p, id=str(i))
                     for i, p in enumerate(self.patterns))
        object.__setattr__(self, "patterns", pats)
        kind, dim = infer_kind(pats, default_kind=self.kind, default_dim=self.dim)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "dim", dim)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(pats):
                raise SchemaError(
                    f"{len(labels)} labels for {len(pats)} patterns")
            for lab in labels:
                if isinstance(lab, bool) or not isinstance(lab, (int, np.integer)) or lab < 1:
                    raise SchemaError(f"invalid class label {lab!r}; expected integer >= 1")
            object.__setattr__(self, "labels", tuple(int(v) for v in labels))

    def __len__(self):
        return len(self.patterns)

    @property
    def ids(self):
        return [p.id for p in self.patterns]

    @property
    def y(self):
        """Labels as an int array (raises if the dataset is unlabelled)."""
        if self.labels is None:
            raise SchemaError("dataset has no labels")
        return np.asarray(self.labels, dtype=int)

    def subset(self, indices):
        idx = [int(i) for i in indices]
        labels = None if self.labels is None else [self.labels[i] for i in idx]
        return LabeledDataset([self.patterns[i] for i in idx], labels,
                              kind=self.kind, dim=self.dim)

    def where_label(self, *labels):
        keep = [i for i, lab in enumerate(self.y) if lab in labels]
        return self.subset(keep)


def infer_kind(patterns: Sequence[PointPattern], default_kind=NUMERIC, default_dim=None):
    """Return the shared (kind, dim) of ``patterns``; raise on a mix."""
    kind, dim = None, None
    for p in patterns:
        if len(p) == 0:
            continue
        if kind is None:
            kind, dim = p.kind, p.dim
        elif p.kind != kind:
            raise SchemaError(
                f"pattern {p.id!r} is {p.kind} but the dataset is {kind}")
        elif p.dim != dim:
            raise SchemaError(
                f"pattern {p.id!r} has dimension {p.dim}, expected {dim}")
    if kind is None:
        return default_kind, default_dim
    if default_dim is not None and dim is not None and kind == NUMERIC and dim != default_dim:
        raise SchemaError(f"dimension {dim} conflicts with declared {default_dim}")
    return kind, dim


def _parse_points(points, pid, lineno):
    if not isinstance(points, list):
        raise ParseError(f"pattern {pid!r}: 'points' must be an array", lineno)
    if not points:
        return np.empty((0, 0))
    if all(isinstance(t, str) for t in points):
        return tuple(points)
    rows = []
    for el in points:
        if not isinstance(el, list) or not el:
            raise SchemaError(f"line {lineno}: pattern {pid!r}: element {el!r} is "
                              "neither a token nor a non-empty coordinate array")
        for v in el:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaError(
                    f"line {lineno}: pattern {pid!r}: non-numeric coordinate {v!r}")
            if not math.isfinite(v):
                raise SchemaError(f"line {lineno}: pattern {pid!r}: non-finite coordinate")
        if rows and len(el) != len(rows[0]):
            raise SchemaError(f"line {lineno}: pattern {pid!r}: ragged element dimensions")
        rows.append([float(v) for v in el])
    return np.array(rows, dtype=float)


def parse_dataset(stream) -> LabeledDataset:
    """Read a JSON-lines dataset from a binary/text stream, bytes or str."""
    if isinstance(stream, (bytes, bytearray)):
        text = stream.decode("utf-8")
    elif isinstance(stream, str):
        text = stream
    else:
        data = stream.read()
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data

    patterns, labels = [], []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line, parse_constant=_reject_constant)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not isinstance(rec, dict):
            raise ParseError("record is not a JSON object", lineno)
        pid = rec.get("id")
        if not isinstance(pid, str):
            raise ParseError("missing or non-string 'id'", lineno)
        if "points" not in rec:
            raise ParseError(f"pattern {pid!r}: missing 'points'", lineno)
        pts = _parse_points(rec["points"], pid, lineno)
        try:
            patterns.append(PointPattern(pts, id=pid))
        except SchemaError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
        labels.append(rec.get("label"))

    present = [lab is not None for lab in labels]
    if any(present) and not all(present):
        raise SchemaError("either every record or no record may carry a label")
    try:
        return LabeledDataset(patterns, labels if all(present) and labels else None)
    except SchemaError as exc:
        raise SchemaError(str(exc)) from None


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def _fmt(v):
    s = format(v, ".17g")
    return s if any(ch in s for ch in ".eEn") else s + ".0"


def format_real(v: float) -> str:
    """17-significant-digit decimal, which round-trips doubles exactly."""
    return _fmt(float(v))


def _record(p: PointPattern, label):
    head = '{"id":' + json.dumps(p.id, ensure_ascii=False)
    if label is not None:
        head += ',"label":' + str(int(label))
    if p.kind == CATEGORICAL:
        body = "[" + ",".join(json.dumps(t, ensure_ascii=False) for t in p.points) + "]"
    else:
        body = "[" + ",".join("[" + ",".join(_fmt(v) for v in row) + "]"
                              for row in p.points.tolist()) + "]"
    return head + ',"points":' + body + "}\n"


def serialize_dataset(ds: LabeledDataset) -> bytes:
    buf = io.StringIO()
    labels = ds.labels if ds.labels is not None else [None] * len(ds)
    for p, lab in zip(ds.patterns, labels):
        buf.write(_record(p, lab))
    return buf.getvalue().encode("utf-8")


def load_dataset(path) -> LabeledDataset:
    with open(path, "rb") as fh:
        return parse_dataset(fh)


def save_dataset(ds: LabeledDataset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_dataset(ds))


def as_patterns(X: Iterable) -> list[PointPattern]:
    """Coerce a dataset, or a sequence of patterns/arrays, to PointPatterns."""
    if isinstance(X, LabeledDataset):
        return list(X.patterns)
    out = []
    for i, x in enumerate(X):
        out.append(x if isinstance(x, PointPattern) else PointPattern(x, id=str(i)))
    return out

"""Clustering, classification and detection scores, plus CV folds.

Clustering scores compare a predicted partition with ground-truth labels:

* purity: fraction of points carrying their cluster's majority label;
* NMI: mutual information over the geometric mean of the two entropies
  (natural logs), defined as 0 when either partition has one block;
* Rand index and F1 over the N(N-1)/2 point pairs ("same cluster" as the
  positive decision, "same class" as the truth).
"""

from __future__ import annotations

import json

import numpy as np


def _aligned(pred, true):
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError(f"length mismatch: {pred.shape} vs {true.shape}")
    return pred, true


def contingency_table(pred, true):
    """Counts ``n[k, l]`` of points in predicted cluster k with true label l."""
    pred, true = _aligned(pred, true)
    _, ki = np.unique(pred, return_inverse=True)
    _, li = np.unique(true, return_inverse=True)
    table = np.zeros((ki.max(initial=-1) + 1, li.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ki, li), 1)
    return table


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def clustering_metrics(pred, true) -> dict:
    table = contingency_table(pred, true)
    N = int(table.sum())
    if N == 0:
        raise ValueError("no observations")
    purity = table.max(axis=1).sum() / N

    hk = _entropy(table.sum(axis=1))
    hl = _entropy(table.sum(axis=0))
    if hk == 0.0 or hl == 0.0:
        nmi = 0.0
    else:
        joint = table / N
        outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / N**2
        nz = joint > 0
        mi = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
        nmi = min(1.0, max(0.0, mi / np.sqrt(hk * hl)))

    pairs = N * (N - 1) // 2
    tp = int(_comb2(table).sum())
    same_cluster = int(_comb2(table.sum(axis=1)).sum())
    same_class = int(_comb2(table.sum(axis=0)).sum())
    fp = same_cluster - tp
    fn = same_class - tp
    tn = pairs - tp - fp - fn
    rand = (tp + tn) / pairs if pairs else 1.0
    precision = tp / same_cluster if same_cluster else 0.0
    recall = tp / same_class if same_class else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"purity": float(purity), "nmi": float(nmi), "rand_index": float(rand),
            "f1": float(f1)}


def classification_metrics(pred, true) -> dict:
    pred, true = _aligned(pred, true)
    accuracy = float(np.mean(pred == true)) if len(true) else 0.0
    per_class = {}
    for lab in np.union1d(np.unique(pred), np.unique(true)):
        tp = int(np.sum((pred == lab) & (true == lab)))
        fp = int(np.sum((pred == lab) & (true != lab)))
        fn = int(np.sum((pred != lab) & (true == lab)))
        per_class[lab.item()] = 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0
    macro = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return {"accuracy": accuracy, "per_class_f1": per_class, "macro_f1": macro}


def detection_metrics(flags, novel) -> dict:
    """Precision/recall/F1 with "novel" as the positive class."""
    flags, novel = _aligned(np.asarray(flags, dtype=bool), np.asarray(novel, dtype=bool))
    tp = int(np.sum(flags & novel))
    fp = int(np.sum(flags & ~novel))
    fn = int(np.sum(~flags & novel))
    if tp + fp + fn == 0:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn)
    return {"precision": precision, "recall": recall, "f1": f1}


def kfold(n_or_labels, k, seed=0, stratified=False):
    """Split indices into ``k`` disjoint test folds of near-equal size.

    Indices are shuffled (per class when ``stratified``), laid end to end
    and dealt round-robin, so fold sizes differ by at most one and, when
    stratified, so do the per-class counts. The first ``N % k`` folds get
    the extra element.
    """
    if np.ndim(n_or_labels) == 0:
        N = int(n_or_labels)
        labels = np.zeros(N, dtype=int)
    else:
        labels = np.asarray(n_or_labels)
        N = len(labels)
    if not 2 <= k <= N:
        raise ValueError(f"k must lie in [2, {N}], got {k}")
    rng = np.random.default_rng(seed)
    if stratified:
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == lab))
                                for lab in np.unique(labels)])
    else:
        order = rng.permutation(N)
    folds = [[] for _ in range(k)]
    for pos, idx in enumerate(order):
        folds[pos % k].append(int(idx))
    return [np.sort(np.asarray(f, dtype=int)) for f in folds]


def summarize(runs) -> dict:
    """Mean and standard deviation of each numeric field across runs."""
    keys = [k for k, v in runs[0].items() if isinstance(v, (int, float))]
    out = {}
    for key in keys:
        vals = np.array([r[key] for r in runs], dtype=float)
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def dumps(report) -> str:
    return json.dumps(report, sort_keys=True) + "\n"

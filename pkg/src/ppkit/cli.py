"""``ppkit`` command line: gen, dist, cluster, classify, detect, eval.

Every run writes ``run-manifest.json`` next to its primary output with the
resolved configuration. ``--threads`` only changes scheduling, never
results, so it is left out of the manifest.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .cluster import ClusteringResult, SetAffinityPropagation
from .distances import FAMILIES, DistanceSpec, distance_matrix, pairwise_distances
from .exceptions import PPKitError
from .metrics import (classification_metrics, clustering_metrics, detection_metrics, dumps,
                      kfold, summarize)
from .neighbors import cv_predictions
from .novelty import SCORINGS, NNNoveltyDetector, report_lines
from .patterns import LabeledDataset, load_dataset, save_dataset
from .simulate import SCENARIO_PARAMS, ScenarioSpec, default_scenario, generate


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _k_list(text):
    """``3``, ``1,3,5`` or ``1-10``."""
    try:
        if "-" in text:
            a, b = map(int, text.split("-"))
            ks = list(range(a, b + 1))
        else:
            ks = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}")
    return ks


def _preference(text):
    if text in ("median", "min"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("preference must be median, min or a number") from None


def _add_distance(p, auto_cutoff=False):
    g = p.add_argument_group("distance")
    g.add_argument("--distance", choices=FAMILIES, default="ospa",
                   help="set distance family (default: %(default)s)")
    g.add_argument("--p", type=float, default=2.0, help="order p (default: %(default)s)")
    g.add_argument("--cutoff", default=None,
                   help="OSPA cutoff c, required for ospa"
                   + (" ('auto' derives it from the normal set)" if auto_cutoff else ""))
    g.add_argument("--base", choices=("euclidean", "discrete"), default=None,
                   help="base metric (default: euclidean for numbers, discrete for tokens)")


def _add_common(p, out_help, seed=False):
    p.add_argument("--out", required=True, help=out_help)
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: $PPKIT_THREADS or 1)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")


def build_parser():
    parser = _Parser(prog="ppkit", description="Learning on point patterns with set distances.")
    parser.add_argument("--version", action="version", version=f"ppkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="simulate a labelled scenario dataset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=sorted(SCENARIO_PARAMS),
                     help="built-in scenario")
    src.add_argument("--config", help="scenario JSON file")
    p.add_argument("--count", type=_positive_int, default=200,
                   help="patterns per cluster for built-in scenarios (default: %(default)s)")
    _add_common(p, "output dataset (JSON lines)", seed=True)

    p = sub.add_parser("dist", help="pairwise distance matrix")
    p.add_argument("--in", dest="input", required=True, help="dataset (JSON lines)")
    _add_distance(p)
    _add_common(p, "output CSV matrix; ids go to OUT.ids.json")

    p = sub.add_parser("cluster", help="affinity propagation clustering")
    p.add_argument("--in", dest="input", required=True, help="dataset (JSON lines)")
    _add_distance(p)
    p.add_argument("--preference", type=_preference, default="median",
                   help="median, min or a number (default: %(default)s)")
    p.add_argument("--n-clusters", type=_positive_int, default=None,
                   help="search a preference giving this many clusters")
    p.add_argument("--damping", type=float, default=0.5, help="damping (default: %(default)s)")
    p.add_argument("--theta", type=float, default=1e-6,
                   help="stop when no message moves by more than this (default: %(default)s)")
    p.add_argument("--max-iter", type=_positive_int, default=1000,
                   help="iteration cap (default: %(default)s)")
    p.add_argument("--stable-iter", type=_positive_int, default=50,
                   help="stop after this many sweeps with unchanged labels (default: %(default)s)")
    _add_common(p, "output clustering result (JSON)")

    p = sub.add_parser("classify", help="k-NN cross-validation")
    p.add_argument("--in", dest="input", required=True, help="labelled dataset (JSON lines)")
    _add_distance(p)
    p.add_argument("--k", type=_k_list, default=[1],
                   help="neighbours: 3, 1,3,5 or 1-10 (default: 1)")
    p.add_argument("--folds", type=_positive_int, default=10,
                   help="cross-validation folds (default: %(default)s)")
    _add_common(p, "output metrics (JSON)", seed=True)

    p = sub.add_parser("detect", help="nearest-normal-neighbour novelty detection")
    p.add_argument("--normal", required=True, help="normal training set (JSON lines)")
    p.add_argument("--in", dest="input", required=True, help="candidates (JSON lines)")
    _add_distance(p, auto_cutoff=True)
    p.add_argument("--percentile", type=float, default=95.0,
                   help="threshold percentile of leave-one-out scores (default: %(default)s)")
    p.add_argument("--cutoff-percentile", type=float, default=95.0,
                   help="percentile used by --cutoff auto (default: %(default)s)")
    p.add_argument("--scoring", choices=SCORINGS, default="distance",
                   help="score type (default: %(default)s)")
    _add_common(p, "output report (JSON lines)")

    p = sub.add_parser("eval", help="score a result file against ground truth")
    p.add_argument("--result", required=True, help="cluster JSON or detect report")
    p.add_argument("--in", dest="input", required=True, help="labelled dataset (JSON lines)")
    p.add_argument("--task", choices=("cluster", "detect"), required=True)
    p.add_argument("--normal-label", type=int, default=None,
                   help="for detect: label of the normal class; others count as novel")
    _add_common(p, "output metrics (JSON)")
    return parser


def _spec(args, allow_auto=False):
    cutoff = args.cutoff
    if args.distance == "ospa":
        if cutoff is None:
            raise UsageError("--cutoff is required with --distance ospa")
        if not (allow_auto and cutoff == "auto"):
            try:
                cutoff = float(cutoff)
            except ValueError:
                raise UsageError(f"--cutoff must be a number, got {cutoff!r}") from None
    elif cutoff is not None:
        raise UsageError("--cutoff only applies to --distance ospa")
    if cutoff == "auto":
        return None, "auto"
    try:
        return DistanceSpec(args.distance, args.p, cutoff, args.base), cutoff
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _manifest(args, extra=None):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "threads"}
    if extra:
        cfg.update(extra)
    man = {"ppkit": __version__, "command": args.command, "config": cfg}
    path = os.path.join(os.path.dirname(os.path.abspath(args.out)), "run-manifest.json")
    _write(path, json.dumps(man, indent=2, sort_keys=True) + "\n")


def _cmd_gen(args):
    if args.scenario:
        spec = default_scenario(args.scenario, args.seed, args.count)
    else:
        spec = ScenarioSpec.load(args.config)
        spec = ScenarioSpec(spec.clusters, args.seed, spec.name)
    save_dataset(generate(spec), args.out)
    return {"scenario_spec": spec.to_dict()}


def _cmd_dist(args):
    spec, _ = _spec(args)
    distance_matrix(load_dataset(args.input), spec, threads=args.threads).save(args.out)


def _cmd_cluster(args):
    spec, _ = _spec(args)
    ds = load_dataset(args.input)
    est = SetAffinityPropagation(spec.family, spec.p, spec.cutoff, spec.base,
                                 preference=args.preference, n_clusters=args.n_clusters,
                                 damping=args.damping, convergence_threshold=args.theta,
                                 max_iter=args.max_iter, stable_iter=args.stable_iter,
                                 threads=args.threads)
    try:
        est.fit(ds)
    except ValueError as exc:
        if isinstance(exc, PPKitError):
            raise
        raise UsageError(str(exc)) from None
    out = est.result_.to_dict()
    out["ids"] = ds.ids
    _write(args.out, json.dumps(out, sort_keys=True) + "\n")


def _cmd_classify(args):
    spec, _ = _spec(args)
    ds = load_dataset(args.input)
    if ds.labels is None:
        raise PPKitError(f"{args.input}: classification needs labelled patterns")
    y = ds.y
    if not 2 <= args.folds <= len(y):
        raise UsageError(f"--folds must lie in [2, {len(y)}]")
    D = pairwise_distances(ds, spec=spec, threads=args.threads)
    folds = kfold(y, args.folds, seed=args.seed, stratified=True)
    n_train = len(y) - max(len(f) for f in folds)
    report = {"per_k": {}}
    best = None
    for k in args.k:
        if k > n_train:
            raise UsageError(f"k={k} exceeds the smallest training fold ({n_train})")
        pred = cv_predictions(D, y, k, folds)
        runs = [classification_metrics(pred[f], y[f]) for f in folds]
        entry = {"folds": [r["accuracy"] for r in runs],
                 "summary": summarize([{"accuracy": r["accuracy"], "macro_f1": r["macro_f1"]}
                                       for r in runs]),
                 "pooled": classification_metrics(pred, y)}
        report["per_k"][str(k)] = entry
        acc = entry["summary"]["accuracy"]["mean"]
        if best is None or acc > best[1]:
            best = (k, acc)
    report["best_k"], report["best_accuracy"] = best
    _write(args.out, dumps(report))


def _cmd_detect(args):
    spec, cutoff = _spec(args, allow_auto=True)
    normal = load_dataset(args.normal)
    cands = load_dataset(args.input)
    if args.scoring == "uncapped-ospa" and args.distance != "ospa":
        raise UsageError("--scoring uncapped-ospa needs --distance ospa")
    det = NNNoveltyDetector(args.distance, args.p, cutoff if spec is None else spec.cutoff,
                            args.base, args.percentile, args.cutoff_percentile, args.scoring,
                            args.threads)
    for q in (args.percentile, args.cutoff_percentile):
        if not 0 <= q <= 100:
            raise UsageError(f"percentile must lie in [0, 100], got {q}")
    det.fit(normal)
    _write(args.out, report_lines(det.detect(cands)))
    return {"resolved_cutoff": det.cutoff_, "threshold": det.threshold_}


def _cmd_eval(args):
    if args.task == "detect" and args.normal_label is None:
        raise UsageError("--normal-label is required for --task detect")
    ds = load_dataset(args.input)
    if ds.labels is None:
        raise PPKitError(f"{args.input}: evaluation needs labelled patterns")
    if args.task == "cluster":
        with open(args.result, encoding="utf-8") as fh:
            res = ClusteringResult.from_dict(json.load(fh))
        if len(res.exemplar_of) != len(ds):
            raise PPKitError(f"result has {len(res.exemplar_of)} labels, dataset {len(ds)}")
        report = clustering_metrics(res.exemplar_of, ds.y)
    else:
        with open(args.result, encoding="utf-8") as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        truth = dict(zip(ds.ids, ds.y.tolist()))
        missing = [r["id"] for r in rows if r["id"] not in truth]
        if missing:
            raise PPKitError(f"ids not in dataset: {', '.join(missing[:5])}")
        flags = [r["novel"] for r in rows]
        novel = [truth[r["id"]] != args.normal_label for r in rows]
        report = detection_metrics(flags, novel)
    _write(args.out, dumps(report))


COMMANDS = {"gen": _cmd_gen, "dist": _cmd_dist, "cluster": _cmd_cluster,
            "classify": _cmd_classify, "detect": _cmd_detect, "eval": _cmd_eval}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        extra = COMMANDS[args.command](args)
        _manifest(args, extra)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PPKitError, ValueError, OSError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

import numpy as np
import pytest

from ppkit.distances import DistanceSpec, ospa, ospa_decompose, pairwise_distances
from ppkit.exceptions import DegenerateError, EmptyPatternError, SchemaError
from ppkit.novelty import (NNNoveltyDetector, decompose_pairs, detect, fit_novelty,
                           fit_threshold, loo_nnn_distances, nnn_distance, select_cutoff)
from ppkit.patterns import LabeledDataset, PointPattern


def p1(*xs, id=""):
    return PointPattern(np.array(xs, dtype=float).reshape(-1, 1), id=id)


@pytest.mark.parametrize("spec", [DistanceSpec("hausdorff"), DistanceSpec("wasserstein"),
                                  DistanceSpec("ospa", cutoff=100)])
def test_nnn_examples(spec):
    assert nnn_distance([p1(0)], p1(5), spec) == pytest.approx(5)
    assert nnn_distance([p1(0), p1(10)], p1(9), spec) == pytest.approx(1)
    assert nnn_distance([p1(0), p1(3, 4)], p1(4, 3), spec) == 0


def test_nnn_empty_candidate():
    with pytest.raises(EmptyPatternError):
        nnn_distance([p1(0)], p1(), DistanceSpec("hausdorff"))
    assert nnn_distance([p1(0)], p1(), DistanceSpec("ospa", cutoff=2)) == 2


def test_threshold_examples():
    spec = DistanceSpec("hausdorff")
    assert fit_threshold([p1(2)] * 5, spec) == 0
    # leave-one-out distances 1, 2, 3, 4 (patterns at 0, 1, 3, 6, 10)
    normal = [p1(0), p1(1), p1(3), p1(6), p1(10)]
    loo = loo_nnn_distances(normal, spec)
    assert sorted(loo.tolist()) == [1, 1, 2, 3, 4]
    assert fit_threshold(normal[1:4] + [p1(7)], spec, q=50) == pytest.approx(
        np.percentile([2, 2, 1, 1], 50))
    assert fit_threshold(normal, spec, q=100) == 4
    with pytest.raises(SchemaError):
        fit_threshold([p1(0)], spec)
    with pytest.raises(ValueError):
        fit_threshold(normal, spec, q=101)


def test_threshold_percentile_is_linear():
    # four equally spaced patterns: every LOO distance is the spacing
    spec = DistanceSpec("hausdorff")
    normal = [p1(0), p1(1), p1(3), p1(7), p1(15)]
    loo = loo_nnn_distances(normal, spec)
    assert fit_threshold(normal, spec, q=50) == np.percentile(loo, 50)
    D = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.percentile(D, 50) == 2.5


def test_detect_strict_threshold():
    spec = DistanceSpec("hausdorff")
    model = fit_novelty(LabeledDataset([p1(0, id="a"), p1(2, id="b")]), spec, q=100)
    assert model.threshold == 2
    rows = detect(model, [p1(0, id="same"), p1(4, id="edge"), p1(4.5, id="far")])
    assert [r["novel"] for r in rows] == [False, False, True]
    assert [r["score"] for r in rows] == [0, 2, 2.5]
    assert all(r["threshold"] == 2 for r in rows)


def test_detect_monotone_and_pointwise():
    rng = np.random.default_rng(0)
    normal = [PointPattern(rng.normal(0, 1, (5, 2))) for _ in range(30)]
    cands = [PointPattern(rng.normal(m, 1, (5, 2)), id=str(i))
             for i, m in enumerate(np.linspace(0, 4, 20))]
    spec = DistanceSpec("ospa", cutoff=3)
    base = fit_novelty(normal, spec)
    prev = None
    for tau in (0.5, 1.0, base.threshold, 2.0, 3.0):
        model = type(base)(base.normal, spec, tau)
        rows = detect(model, cands)
        flags = np.array([r["novel"] for r in rows])
        assert all(r["novel"] == (r["score"] > tau) for r in rows)
        if prev is not None:
            assert not np.any(flags & ~prev)
        prev = flags
    scores = [r["score"] for r in detect(base, cands)]
    assert scores == [nnn_distance(normal, c, spec) for c in cands]


def test_full_percentile_accepts_all_training_normals():
    rng = np.random.default_rng(1)
    normal = LabeledDataset([PointPattern(rng.normal(0, 1, (4, 2)), id=str(i))
                             for i in range(25)])
    spec = DistanceSpec("wasserstein")
    tau = fit_threshold(normal, spec, q=100)
    loo = loo_nnn_distances(normal, spec)
    assert np.all(loo <= tau)


def test_select_cutoff_formula():
    # two normal patterns: card part 1/2, feature part 2**2 / 2 = 2 -> c = sqrt(2 / 0.5)
    c = select_cutoff([p1(0), p1(2, 50)], p=2)
    card, feat = ospa_decompose(p1(0), p1(2, 50), p=2)
    assert (card, feat) == (0.5, 2.0)
    assert c == pytest.approx(2.0)
    for p in (1.0, 2.0, 3.0):
        c = select_cutoff([p1(0), p1(1, 100)], p=p)
        card, feat = ospa_decompose(p1(0), p1(1, 100), p=p)
        assert c == pytest.approx((feat / card) ** (1 / p))


def test_select_cutoff_degenerate():
    with pytest.raises(DegenerateError):
        select_cutoff([p1(0, 1), p1(5, 6), p1(2, 3)])  # same sizes
    with pytest.raises(DegenerateError):
        select_cutoff([p1(1), p1(1, 1)])  # no feature cost
    with pytest.raises(SchemaError):
        select_cutoff([p1(1)])


def test_decompose_pairs_matches_scalar():
    rng = np.random.default_rng(2)
    pats = [PointPattern(rng.uniform(0, 5, (int(rng.integers(0, 5)), 2))) for _ in range(8)]
    card, feat = decompose_pairs(pats, p=2)
    for i in range(8):
        for j in range(8):
            if len(pats[i]) == len(pats[j]) == 0:
                assert card[i, j] == feat[i, j] == 0
            else:
                assert (card[i, j], feat[i, j]) == ospa_decompose(pats[i], pats[j], p=2)


def test_detector_estimator():
    rng = np.random.default_rng(3)
    normal = [PointPattern(rng.normal(0, 1, (rng.poisson(10) + 1, 2)), id=f"n{i}")
              for i in range(40)]
    odd = [PointPattern(rng.normal(4, 1, (rng.poisson(30) + 1, 2)), id=f"o{i}")
           for i in range(10)]
    det = NNNoveltyDetector(distance="ospa", cutoff="auto").fit(normal)
    assert det.cutoff_ == pytest.approx(select_cutoff(normal))
    pred = det.predict(odd + normal[:5])
    assert set(pred.tolist()) <= {-1, 1}
    assert np.all(pred[:10] == -1)
    scores = det.score_samples(odd)
    D = pairwise_distances(odd, normal, spec=DistanceSpec("ospa", cutoff=det.cutoff_))
    assert np.allclose(scores, D.min(axis=1))
    assert np.allclose(det.decision_function(odd), det.threshold_ - scores)
    rows = det.detect(odd)
    assert [r["id"] for r in rows] == [p.id for p in odd]

    h = NNNoveltyDetector(distance="hausdorff").fit(normal)
    assert h.cutoff_ is None and h.threshold_ > 0


def test_uncapped_scoring_mode():
    rng = np.random.default_rng(4)
    normal = [PointPattern(rng.normal(0, 1, (rng.poisson(6) + 1, 2))) for _ in range(20)]
    det = NNNoveltyDetector(scoring="uncapped-ospa").fit(normal)
    ratio = det.cutoff_ ** 2
    T = PointPattern(rng.normal(0, 1, (3, 2)))
    want = min((ratio * card + feat) ** 0.5
               for card, feat in (ospa_decompose(T, X) for X in normal))
    assert det.score_samples([T])[0] == pytest.approx(want)
    # below the cutoff the uncapped score coincides with capped OSPA
    X = normal[0]
    if len(X) and len(T):
        c = det.cutoff_
        card, feat = ospa_decompose(T, X)
        if np.max(np.abs(T.points[:, None] - X.points[None])) < c / 2:
            assert (ratio * card + feat) ** 0.5 == pytest.approx(ospa(T, X, c=c))
    with pytest.raises(ValueError):
        NNNoveltyDetector(scoring="bogus").fit(normal)

from fractions import Fraction

import numpy as np
import pytest
from sklearn.neighbors import KNeighborsClassifier
from sklearn.pipeline import make_pipeline

import oracles
from ppkit.base import BaseDistanceSpec, capped, discrete, euclidean
from ppkit.distances import (DistanceMatrix, DistanceSpec, SetDistanceTransformer,
                             distance_matrix, hausdorff, ospa, ospa_decompose,
                             pairwise_distances, set_distance, solve_assignment,
                             solve_transport, wasserstein)
from ppkit.exceptions import EmptyPatternError, SchemaError
from ppkit.patterns import LabeledDataset, PointPattern


def pat(*xs):
    return PointPattern(np.array(xs, dtype=float).reshape(len(xs), -1))


def rand_pattern(rng, lo=1, hi=6, d=2):
    return rng.uniform(0, 10, size=(int(rng.integers(lo, hi + 1)), d))


# base distances

def test_euclidean_examples():
    assert euclidean((0, 0), (3, 4)) == 5
    assert euclidean((1.5, 2.0), (1.5, 2.0)) == 0
    assert euclidean((0,), (10,)) == 10
    with pytest.raises(ValueError):
        euclidean((0, 0), (1,))


def test_discrete_examples():
    assert discrete("ap1", "ap1") == 0
    assert discrete("ap1", "ap2") == 1
    assert discrete("", "x") == 1


def test_capped_examples():
    assert capped(10, 5) == 5
    assert capped(1, 5) == 1
    assert capped(5, 5) == 5
    with pytest.raises(ValueError):
        capped(1, 0)


def test_base_spec_cap():
    f = BaseDistanceSpec("euclidean", cap=2.0)
    assert f((0, 0), (3, 4)) == 2.0
    with pytest.raises(ValueError):
        BaseDistanceSpec("manhattan")


def test_capped_euclidean_is_metric():
    rng = np.random.default_rng(0)
    for c in (0.5, 3.0):
        f = BaseDistanceSpec("euclidean", cap=c)
        for _ in range(2000):
            x, y, z = rng.uniform(0, 10, (3, 2))
            assert f(x, x) == 0
            assert f(x, y) == f(y, x)
            assert f(x, z) <= f(x, y) + f(y, z) + 1e-12


# set distances: worked examples

def test_hausdorff_examples():
    assert hausdorff(pat(0), pat(0, 10)) == 10
    X = pat(1, 2, 7)
    assert hausdorff(X, X) == 0
    with pytest.raises(EmptyPatternError) as info:
        hausdorff(pat(0), PointPattern(np.empty((0, 1))))
    assert info.value.which == "Y"


def test_wasserstein_examples():
    assert wasserstein(pat(0), pat(0, 10), p=1) == pytest.approx(5, abs=1e-12)
    assert wasserstein(pat(0), pat(1), p=2) == pytest.approx(1, abs=1e-12)
    X = pat(3, 1, 4, 1)
    assert wasserstein(X, X, p=2) == 0
    with pytest.raises(EmptyPatternError):
        wasserstein(PointPattern(np.empty((0, 1))), pat(1))


def test_ospa_examples():
    empty = PointPattern(np.empty((0, 2)))
    assert ospa(empty, empty, c=5) == 0
    assert ospa(empty, pat([1, 2]), c=5) == 5
    assert ospa(pat([1, 2]), empty, c=5) == 5
    assert ospa(pat(0), pat(0, 10), p=1, c=5) == pytest.approx(2.5, abs=1e-12)
    with pytest.raises(ValueError):
        ospa(pat(0), pat(1), c=0)


def test_decompose_examples():
    assert ospa_decompose(pat(0), pat(0, 10), p=1) == (0.5, 0.0)
    assert ospa_decompose(pat(4, 2), pat(2, 4)) == (0.0, 0.0)
    assert ospa_decompose(pat(0), pat(3), p=2) == (0.0, 9.0)
    empty = PointPattern(np.empty((0, 1)))
    assert ospa_decompose(empty, pat(3)) == (1.0, 0.0)
    with pytest.raises(EmptyPatternError):
        ospa_decompose(empty, empty)


def test_categorical_ospa_counts_set_difference():
    a = PointPattern(["ap1", "ap2", "ap3"])
    b = PointPattern(["ap2", "ap3"])
    # one unmatched token at cost c**p, matched tokens are equal
    assert ospa(a, b, p=1, c=1) == pytest.approx(1 / 3)
    assert hausdorff(a, b) == 1.0
    with pytest.raises(SchemaError):
        ospa(a, b, c=1, base="euclidean")


def test_kind_mismatch_rejected():
    with pytest.raises(SchemaError):
        ospa(PointPattern(["a"]), pat(1), c=1)
    with pytest.raises(SchemaError):
        ospa(pat([1, 2]), pat(1), c=1)


def test_spec_validation():
    with pytest.raises(ValueError):
        DistanceSpec("ospa")
    with pytest.raises(ValueError):
        DistanceSpec("ospa", cutoff=-1)
    with pytest.raises(ValueError):
        DistanceSpec("hausdorff", p=0.5)
    with pytest.raises(ValueError):
        DistanceSpec("chamfer")
    assert DistanceSpec("ospa", cutoff=2).to_dict() == {
        "family": "ospa", "p": 2.0, "cutoff": 2.0, "base": None}


# oracles

def test_ospa_matches_permutation_oracle():
    rng = np.random.default_rng(1)
    for _ in range(150):
        X, Y = rand_pattern(rng, 0, 5), rand_pattern(rng, 0, 5)
        for p, c in ((1, 1.0), (2, 12.0), (2, 3.0), (3, 26.0)):
            assert ospa(X, Y, p=p, c=c) == pytest.approx(oracles.ospa(X, Y, p, c), abs=1e-12)


def test_hausdorff_matches_double_loop():
    rng = np.random.default_rng(2)
    for _ in range(100):
        X, Y = rand_pattern(rng), rand_pattern(rng)
        assert hausdorff(X, Y) == pytest.approx(oracles.hausdorff(X, Y), abs=1e-12)


def test_wasserstein_matches_flow_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(60):
        X, Y = rand_pattern(rng, 1, 3), rand_pattern(rng, 1, 3)
        for p in (1, 2):
            assert wasserstein(X, Y, p=p) == pytest.approx(oracles.wasserstein(X, Y, p),
                                                           abs=1e-12)


def test_assignment_examples():
    cols, total = solve_assignment([[7]])
    assert cols.tolist() == [0] and total == 7
    cols, total = solve_assignment([[0, 9], [9, 0]])
    assert cols.tolist() == [0, 1] and total == 0
    with pytest.raises(ValueError):
        solve_assignment(np.ones((3, 2)))


def test_assignment_matches_enumeration():
    rng = np.random.default_rng(4)
    for _ in range(40):
        C = rng.integers(0, 20, size=(5, 7)).astype(float)
        cols, total = solve_assignment(C)
        assert len(set(cols.tolist())) == 5
        assert total == C[np.arange(5), cols].sum() == oracles.assignment_min(C)


def test_transport_examples():
    plan, total = solve_transport([[4.0]])
    assert plan.tolist() == [[1.0]] and total == 4
    plan, total = solve_transport(1 - np.eye(3))
    assert total == 0 and np.allclose(plan, np.eye(3) / 3)


def test_transport_matches_integer_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(40):
        m, n = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        C = rng.integers(0, 30, size=(m, n))
        plan, total = solve_transport(C.astype(float))
        assert np.allclose(plan.sum(axis=1), 1 / m, atol=1e-9)
        assert np.allclose(plan.sum(axis=0), 1 / n, atol=1e-9)
        flow = np.rint(plan * m * n).astype(int)
        assert Fraction(int((flow * C).sum()), m * n) == oracles.transport_min(C.tolist())


# properties

def test_decomposition_consistency():
    """When every base distance is below c, capped and uncapped assignments
    coincide and the OSPA value splits into its two parts."""
    rng = np.random.default_rng(6)
    for _ in range(200):
        X, Y = rand_pattern(rng, 1, 6), rand_pattern(rng, 1, 6)
        c = 20.0  # above the diameter of [0, 10]^2
        for p in (1.0, 2.0):
            card, feat = ospa_decompose(X, Y, p=p)
            assert ospa(X, Y, p=p, c=c) ** p == pytest.approx(c ** p * card + feat, rel=1e-9)


def test_cardinality_sensitivity_regression():
    """A dense copy of X looks far to OSPA but close to Hausdorff; a single
    outlier does the opposite."""
    X = pat([0.0, 0.0], [1.0, 0.0])
    Y = pat(*([[0.0, 0.0]] * 10 + [[1.0, 0.0]] * 10))
    Z = pat([0.0, 0.0], [1.0, 0.0], [6.0, 0.0])
    assert hausdorff(X, Y) < hausdorff(X, Z)
    assert ospa(X, Y, c=26) > ospa(X, Z, c=26)


def test_ospa_range_and_symmetry():
    rng = np.random.default_rng(7)
    for _ in range(300):
        X, Y = rand_pattern(rng, 0, 8), rand_pattern(rng, 0, 8)
        for c in (1.0, 12.0):
            d = ospa(X, Y, c=c)
            assert 0 <= d <= c
            assert d == ospa(Y, X, c=c)


def test_set_distance_dispatch():
    X, Y = pat(0), pat(0, 10)
    assert set_distance(X, Y, DistanceSpec("hausdorff")) == 10
    assert set_distance(X, Y, DistanceSpec("wasserstein", p=1)) == pytest.approx(5)
    assert set_distance(X, Y, DistanceSpec("ospa", p=1, cutoff=5)) == pytest.approx(2.5)


# matrices

def _dataset(rng, n=12):
    return LabeledDataset([PointPattern(rand_pattern(rng, 1, 5), id=f"p{i}") for i in range(n)])


def test_distance_matrix_basics():
    ds = LabeledDataset([PointPattern(pat(1, 2).points, id="a")])
    M = distance_matrix(ds, DistanceSpec("ospa", cutoff=1))
    assert M.values.tolist() == [[0.0]] and M.ids == ["a"]

    rng = np.random.default_rng(8)
    ds = _dataset(rng)
    dup = LabeledDataset(list(ds.patterns) + [PointPattern(ds.patterns[3].points, id="dup")])
    for spec in (DistanceSpec("hausdorff"), DistanceSpec("wasserstein"),
                 DistanceSpec("ospa", cutoff=4)):
        M = distance_matrix(dup, spec).values
        assert np.array_equal(M, M.T)
        assert M[3, -1] == 0
        assert np.all(np.diag(M) == 0)
        for i, j in ((0, 1), (5, 2)):
            assert M[i, j] == set_distance(dup.patterns[i], dup.patterns[j], spec)


def test_pairwise_threads_do_not_change_results():
    rng = np.random.default_rng(9)
    ds = _dataset(rng, 70)
    spec = DistanceSpec("wasserstein")
    a = pairwise_distances(ds, spec=spec, threads=1)
    b = pairwise_distances(ds, spec=spec, threads=4)
    assert np.array_equal(a, b)
    cross = pairwise_distances(ds.patterns[:5], ds.patterns, spec=spec, threads=3)
    assert np.array_equal(cross, a[:5])


def test_pairwise_progress_and_empty_error():
    rng = np.random.default_rng(10)
    ds = _dataset(rng, 40)
    seen = []
    pairwise_distances(ds, spec=DistanceSpec("hausdorff"), progress=lambda d, t: seen.append((d, t)))
    assert seen[-1] == (40, 40)
    bad = LabeledDataset(list(ds.patterns) + [PointPattern(np.empty((0, 2)), id="hole")])
    with pytest.raises(EmptyPatternError, match="hole"):
        pairwise_distances(bad, spec=DistanceSpec("hausdorff"))
    M = pairwise_distances(bad, spec=DistanceSpec("ospa", cutoff=3))
    assert np.all(M[-1, :-1] == 3)


def test_matrix_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    ds = _dataset(rng, 6)
    M = distance_matrix(ds, DistanceSpec("ospa", cutoff=2.5))
    path = tmp_path / "M.csv"
    M.save(path)
    back = DistanceMatrix.load(path)
    assert np.array_equal(back.values, M.values)
    assert back.ids == ds.ids
    assert path.read_text().count("\n") == 6


def test_transformer_in_a_pipeline():
    rng = np.random.default_rng(0)
    pats = [PointPattern(rng.normal(10 * (i % 2), 1, (3, 2))) for i in range(20)]
    y = np.arange(20) % 2
    tr = SetDistanceTransformer("hausdorff").fit(pats[:5])
    E = tr.transform(pats)
    assert E.shape == (20, 5)
    assert np.allclose(E, pairwise_distances(pats, pats[:5], spec=DistanceSpec("hausdorff")))
    assert tr.get_params()["distance"] == "hausdorff"
    pipe = make_pipeline(SetDistanceTransformer("ospa", cutoff=5.0), KNeighborsClassifier(1))
    assert pipe.fit(pats, y).score(pats, y) == 1.0

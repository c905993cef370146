import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentstab.assigncluster import (
    align_labels,
    alignment,
    contingency,
    eta,
    kmeans,
    lloyd_from,
    solve_lsap,
)
from latentstab.errors import InfeasibleError, LengthMismatchError, TooFewSamplesError


def brute_force_min(cost):
    n = cost.shape[0]
    return min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def brute_force_agreement(pred, truth, g):
    return max(np.sum(np.asarray(p)[pred] == truth) for p in itertools.permutations(range(g)))


def test_lsap_identity_favoring():
    c = 1.0 - np.eye(4)
    m = solve_lsap(c)
    assert list(m.mapping) == [0, 1, 2, 3] and m.total_cost == 0.0


def test_lsap_swap():
    m = solve_lsap(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert list(m.mapping) == [1, 0] and m.total_cost == 0.0


def test_lsap_random_against_brute_force(rng):
    for _ in range(200):
        g = int(rng.integers(2, 7))
        c = rng.integers(-20, 20, size=(g, g)).astype(float) if rng.random() < 0.5 else rng.normal(size=(g, g))
        m = solve_lsap(c)
        assert sorted(m.mapping) == list(range(g))
        assert m.total_cost == pytest.approx(c[np.arange(g), m.mapping].sum(), abs=0)
        assert m.total_cost == pytest.approx(brute_force_min(c), abs=1e-12)


def test_lsap_forbidden_entries():
    inf = np.inf
    c = np.array([[inf, 1.0, 5.0], [2.0, inf, 1.0], [1.0, 7.0, inf]])
    m = solve_lsap(c)
    assert m.total_cost == 3.0
    with pytest.raises(InfeasibleError):
        solve_lsap(np.array([[inf, inf], [1.0, 2.0]]))


def test_lsap_rectangular():
    c = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0]])
    m = solve_lsap(c)
    assert m.total_cost == 3.0  # rows 0->1, 1->0
    tall = solve_lsap(c.T)
    assert tall.total_cost == 3.0 and (tall.mapping == -1).sum() == 1


def test_align_pure_relabeling():
    pred = np.array([1, 1, 0, 0])
    truth = np.array([0, 0, 1, 1])
    aligned = align_labels(pred, truth, 2)
    assert list(aligned) == [0, 0, 1, 1]
    assert eta(aligned, truth) == 0.0


def test_align_identity():
    y = np.array([0, 1, 2, 2, 1, 0])
    assert list(alignment(y, y, 3).mapping) == [0, 1, 2]


def test_align_random_against_brute_force(rng):
    for _ in range(30):
        pred = rng.integers(0, 4, 50)
        truth = rng.integers(0, 4, 50)
        aligned = align_labels(pred, truth, 4)
        assert np.sum(aligned == truth) == brute_force_agreement(pred, truth, 4)


def test_contingency_sums():
    pred = np.array([0, 1, 1, 2])
    truth = np.array([2, 1, 1, 0])
    c = contingency(pred, truth, 3)
    assert c.sum() == 4 and c[1, 1] == 2 and c[0, 2] == 1


@settings(max_examples=80)
@given(st.integers(0, 2**32), st.integers(2, 5), st.integers(5, 40))
def test_align_invariant_to_label_permutation(seed, g, n):
    rng = np.random.default_rng(seed)
    truth = rng.integers(0, g, n)
    pred = rng.integers(0, g, n)
    counts = contingency(pred, truth, g)
    totals = sorted(sum(counts[i, p[i]] for i in range(g)) for p in itertools.permutations(range(g)))
    if totals[-1] == totals[-2]:
        return  # tied optimum: the aligned labels are not unique
    perm = rng.permutation(g)
    assert np.array_equal(align_labels(perm[pred], truth, g), align_labels(pred, truth, g))


def test_eta_examples():
    assert eta([0, 1, 0, 0], [0, 1, 1, 0]) == 25.0
    assert eta([2, 2, 1], [2, 2, 1]) == 0.0
    with pytest.raises(LengthMismatchError):
        eta([0, 1], [0])


@given(st.lists(st.integers(0, 3), min_size=1, max_size=30), st.integers(0, 1000))
def test_eta_properties(labels, seed):
    y = np.array(labels)
    assert eta(y, y) == 0.0
    other = np.random.default_rng(seed).integers(0, 4, y.size)
    perm = np.random.default_rng(seed + 1).permutation(y.size)
    assert eta(other[perm], y[perm]) == eta(other, y)
    assert 0.0 <= eta(other, y) <= 100.0


def test_kmeans_singletons():
    z = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    a = kmeans(z, 3, seed=1)
    assert sorted(a.labels) == [0, 1, 2]
    assert a.inertia == 0.0


def test_kmeans_one_cluster(rng):
    z = rng.normal(size=(40, 2))
    a = kmeans(z, 1)
    np.testing.assert_allclose(a.centroids[0], z.mean(axis=0))
    assert a.inertia == pytest.approx(z.var(axis=0).sum() * len(z))


def test_kmeans_separated_gaussians(rng):
    truth = np.repeat([0, 1], 100)
    z = rng.normal(size=(200, 2)) + np.where(truth[:, None] == 1, 10.0, 0.0) * np.array([1.0, 0.0])
    a = kmeans(z, 2, seed=3)
    agree = max(np.mean(a.labels == truth), np.mean(a.labels != truth))
    assert agree >= 0.99


def test_kmeans_deterministic(rng):
    z = rng.normal(size=(60, 2))
    a, b = kmeans(z, 4, seed=9), kmeans(z, 4, seed=9)
    assert np.array_equal(a.labels, b.labels) and a.inertia == b.inertia


def test_kmeans_too_few():
    with pytest.raises(TooFewSamplesError):
        kmeans(np.zeros((2, 2)), 3)


def test_kmeans_repairs_empty_cluster(rng):
    z = rng.normal(size=(30, 2))
    # two starting centroids far from every point: both would be empty
    start = np.array([[0.0, 0.0], [100.0, 100.0], [-100.0, 100.0]])
    a = lloyd_from(z, start)
    assert np.bincount(a.labels, minlength=3).min() > 0


@settings(max_examples=30)
@given(st.integers(0, 2**32), st.integers(1, 5))
def test_kmeans_inertia_monotone(seed, g):
    z = np.random.default_rng(seed).normal(size=(50, 2))
    a = kmeans(z, g, seed=seed)
    h = np.array(a.inertia_history)
    assert np.all(np.diff(h) <= 1e-9 * max(1.0, h[0]))
    assert a.inertia <= h[0] + 1e-9
    assert np.bincount(a.labels, minlength=g).min() > 0

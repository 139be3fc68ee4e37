import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aisrec.dataset import RatingsTable, VoteScale
from aisrec.matching import MatchIndex, pairwise_matrix, pearson, significance_weighted_match


def naive_pearson(a, b):
    common = sorted(set(a) & set(b))
    n = len(common)
    if n < 2:
        return 0.0
    xs = [a[i] for i in common]
    ys = [b[i] for i in common]
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        return 0.0
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = math.sqrt(sum((x - mx) ** 2 for x in xs) * sum((y - my) ** 2 for y in ys))
    return num / den


profiles = st.dictionaries(st.integers(0, 15), st.integers(0, 5).map(float), max_size=12)


def test_self_correlation():
    a = {1: 1.0, 2: 3.0, 3: 5.0}
    assert pearson(a, a) == (1.0, 3)


def test_hand_example():
    a = {1: 1.0, 2: 2.0, 3: 3.0, 4: 4.0}
    b = {1: 2.0, 2: 1.0, 3: 4.0, 4: 3.0}
    r, n = pearson(a, b)
    assert n == 4
    assert r == pytest.approx(0.6, abs=1e-15)


def test_zero_variance_and_small_overlap():
    a = {1: 1.0, 2: 2.0, 3: 5.0}
    assert pearson(a, {1: 3.0, 2: 3.0, 3: 3.0}) == (0.0, 3)
    assert pearson(a, {1: 3.0, 9: 1.0}) == (0.0, 1)
    assert pearson(a, {}) == (0.0, 0)


def test_weighting():
    a = {i: float(i % 5) for i in range(10)}
    b = {i: float((i * 3) % 5) for i in range(10)}
    full = significance_weighted_match(a, b, 10)
    assert full.weighted == full.raw_pearson
    half = significance_weighted_match(a, b, 20)
    assert half.weighted == pytest.approx(full.raw_pearson / 2)
    one = significance_weighted_match({1: 2.0}, {1: 4.0}, 5)
    assert (one.raw_pearson, one.overlap, one.weighted) == (0.0, 1, 0.0)


def test_weighting_linear_example():
    # raw 0.8 reached exactly by construction is awkward; check the scaling law directly
    a = {1: 1.0, 2: 2.0, 3: 3.0, 4: 5.0}
    b = {1: 1.0, 2: 3.0, 3: 2.0, 4: 5.0}
    s = significance_weighted_match(a, b, 8)
    assert s.overlap == 4
    assert s.weighted == pytest.approx(s.raw_pearson * 0.5, abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(profiles, profiles)
def test_symmetry_and_bounds(a, b):
    r1, n1 = pearson(a, b)
    r2, n2 = pearson(b, a)
    assert r1 == r2 and n1 == n2
    assert -1 <= r1 <= 1
    s = significance_weighted_match(a, b, 5)
    assert abs(s.weighted) <= abs(s.raw_pearson)
    if s.overlap < 2:
        assert s.raw_pearson == 0 and s.weighted == 0


@settings(max_examples=300, deadline=None)
@given(profiles, profiles, st.floats(-10, 10), st.floats(0.1, 10))
def test_affine_invariance(a, b, shift, factor):
    r, _ = pearson(a, b)
    mean = sum(a.values()) / len(a) if a else 0.0
    moved = {k: mean + factor * (v - mean) + shift for k, v in a.items()}
    assert pearson(moved, b)[0] == pytest.approx(r, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 1), st.integers(1, 200), st.integers(1, 200))
def test_weighting_monotone_in_overlap(raw, n1, n2):
    lo, hi = sorted((n1, n2))
    t = 50
    assert raw * min(lo, t) / t <= raw * min(hi, t) / t


def test_matches_naive_oracle():
    rng = random.Random(5)
    for _ in range(1000):
        items = range(rng.randint(0, 20))
        a = {i: float(rng.randint(0, 5)) for i in items if rng.random() < 0.7}
        b = {i: float(rng.randint(0, 5)) for i in items if rng.random() < 0.7}
        assert abs(pearson(a, b)[0] - naive_pearson(a, b)) <= 1e-12


def test_pairwise_matrix_small_cases(scale):
    t = RatingsTable.from_triples(scale, [(1, 1, 3), (1, 2, 4), (2, 3, 1), (2, 4, 5)])
    one = pairwise_matrix([1], t, 50)
    assert one.entries.shape == (1, 1) and one.entries[0, 0] == 0
    two = pairwise_matrix([1, 2], t, 50)
    assert two.entries[0, 1] == 0 and two.entries[1, 0] == 0
    with pytest.raises(KeyError):
        pairwise_matrix([1, 7], t, 50)


def test_pairwise_matrix_brute_force(clustered):
    table, clusters = clustered
    users = [u for u in table.users if clusters[u] == 0][:3]
    mm = pairwise_matrix(users, table, 10)
    for i, a in enumerate(users):
        for j, b in enumerate(users):
            expect = 0.0 if i == j else significance_weighted_match(table.profile(a), table.profile(b), 10).weighted
            assert mm.entries[i, j] == expect
    assert np.array_equal(mm.entries, mm.entries.T)


@pytest.mark.parametrize("step", [1, 0.5, 0])
def test_index_agrees_with_scalar(step):
    rng = np.random.default_rng(3)
    scale = VoteScale(0, 5, step)
    triples = []
    for u in range(40):
        for i in range(25):
            if rng.random() < 0.4:
                v = rng.uniform(0, 5)
                triples.append((u, i, float(scale.quantize(np.array([v]))[0])))
    table = RatingsTable.from_triples(scale, triples)
    index = MatchIndex(table, 7)
    for a in table.users:
        row = index.user_row(a)
        for b in table.users:
            expect = 0.0 if a == b else significance_weighted_match(table.profile(a), table.profile(b), 7).weighted
            assert abs(row[index.position(b)] - expect) <= 1e-12
    sub = index.submatrix(table.users[:10])
    assert np.array_equal(sub, sub.T)
    assert np.all(np.diag(sub) == 0)

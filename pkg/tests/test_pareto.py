import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frontdescent.pareto import (
    DecisionPoint,
    FrontSet,
    Relation,
    compare,
    crowding_distance,
    crowding_prune,
    dominates,
    filter_nondominated,
    insert_and_filter,
    is_dominated,
    leq,
)


def pts(*values):
    return [DecisionPoint(np.zeros(1), np.array(v, float)) for v in values]


def front(*values):
    return FrontSet(pts(*values))


def values(fs):
    return sorted(tuple(p.fx) for p in fs)


# --- brute-force oracles ----------------------------------------------------


def brute_filter(points):
    keep = []
    for i, p in enumerate(points):
        beaten = any(
            all(q.fx <= p.fx) and any(q.fx < p.fx) for j, q in enumerate(points) if j != i
        )
        twin = any(
            np.array_equal(q.fx, p.fx) and (q.id, j) < (p.id, i)
            for j, q in enumerate(points) if j != i
        )
        if not beaten and not twin:
            keep.append(p)
    return keep


def naive_prune(fx, cap):
    """Drop the smallest crowding distance (earliest on ties), recomputing
    from scratch after every removal."""
    alive = list(range(len(fx)))
    while len(alive) > cap:
        d = crowding_distance(fx[alive])
        alive.pop(int(np.argmin(d)))
    return alive


class TestCompare:
    def test_strictly_less(self):
        r = compare([1, 2], [2, 3])
        assert r is Relation.STRICTLY_LESS
        assert r.lneq and r.leq and r.lt

    def test_equal_is_not_lneq(self):
        r = compare([1, 2], [1, 2])
        assert r is Relation.EQUAL
        assert r.leq and not r.lneq

    def test_incomparable(self):
        assert compare([1, 3], [2, 2]) is Relation.INCOMPARABLE

    def test_weak_domination_and_reverse(self):
        assert compare([1, 2], [1, 3]) is Relation.DOMINATES
        assert compare([1, 3], [1, 2]) is Relation.DOMINATED

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compare([1, 2], [1, 2, 3])

    def test_helpers(self):
        assert leq([1, 1], [1, 1]) and not dominates([1, 1], [1, 1])
        assert dominates([0, 1], [1, 1])


class TestFilter:
    def test_example(self):
        assert values(filter_nondominated(pts((1, 2), (2, 1), (2, 2)))) == [(1, 2), (2, 1)]

    def test_empty(self):
        assert len(filter_nondominated([])) == 0

    def test_duplicates_keep_earliest_id(self):
        a, b = pts((1, 1), (1, 1))
        out = filter_nondominated([b, a])
        assert out.ids == [a.id]

    def test_three_objectives(self):
        out = filter_nondominated(pts((1, 2, 3), (3, 2, 1), (2, 2, 2), (3, 3, 3)))
        assert values(out) == [(1, 2, 3), (2, 2, 2), (3, 2, 1)]

    def test_x_not_copied(self):
        p = pts((1, 2))
        assert filter_nondominated(p)[0] is p[0]


class TestInsert:
    def test_incomparable(self):
        out = insert_and_filter(front((1, 2), (2, 1)), pts((0, 3))[0])
        assert values(out) == [(0, 3), (1, 2), (2, 1)]

    def test_dominates_both(self):
        assert values(insert_and_filter(front((1, 2), (2, 1)), pts((1, 1))[0])) == [(1, 1)]

    def test_duplicate_is_ignored(self):
        s = front((1, 2))
        out = insert_and_filter(s, pts((1, 2))[0])
        assert out is s

    def test_into_empty(self):
        assert values(insert_and_filter(FrontSet(), pts((3, 3))[0])) == [(3, 3)]


class TestIsDominated:
    def test_examples(self):
        assert is_dominated(front((1, 1)), pts((2, 2))[0])
        assert not is_dominated(front((1, 1)), pts((1, 1))[0])
        assert not is_dominated(FrontSet(), pts((5, 5))[0])


class TestCrowding:
    def test_under_cap_is_identity(self):
        s = front((0, 2), (1, 1), (2, 0))
        assert crowding_prune(s, 5) is s

    def test_extremes_survive(self):
        assert values(crowding_prune(front((0, 2), (1, 1), (2, 0)), 2)) == [(0, 2), (2, 0)]

    def test_five_on_a_line(self):
        # interior distances start at 1, 1, 1; dropping the first leaves
        # (2,2) at 1.5 and (3,1) at 1, so (3,1) goes next
        s = front((0, 4), (1, 3), (2, 2), (3, 1), (4, 0))
        assert values(crowding_prune(s, 3)) == [(0, 4), (2, 2), (4, 0)]

    def test_distance_values(self):
        d = crowding_distance(np.array([[0, 4], [1, 3], [3, 1], [4, 0]], float))
        np.testing.assert_allclose(d, [np.inf, 1.5, 1.5, np.inf])

    def test_cap_too_small(self):
        with pytest.raises(ValueError):
            crowding_prune(front((0, 1), (1, 0), (0.5, 0.5)), 1)

    @pytest.mark.parametrize("m", [2, 3])
    def test_matches_naive_recompute(self, m):
        rng = np.random.default_rng(m)
        for _ in range(60):
            count = int(rng.integers(3, 40))
            raw = rng.random((count, m))
            if m == 2:
                raw[:, 1] = 1 - raw[:, 0] + 0.01 * rng.random(count)
            fs = filter_nondominated(pts(*raw))
            cap = int(rng.integers(2, max(3, len(fs))))
            got = crowding_prune(fs, cap)
            want = [fs[i] for i in naive_prune(fs.fx, cap)] if len(fs) > cap else list(fs)
            assert got.ids == [p.id for p in want]


coords = st.integers(min_value=0, max_value=6)


@st.composite
def point_lists(draw, m=2, max_size=200):
    raw = draw(st.lists(st.tuples(*[coords] * m), max_size=max_size))
    return pts(*raw)


@settings(max_examples=150, deadline=None)
@given(point_lists())
def test_filter_matches_brute_force_2d(points):
    assert filter_nondominated(points).ids == [p.id for p in brute_filter(points)]


@settings(max_examples=80, deadline=None)
@given(point_lists(m=3, max_size=120))
def test_filter_matches_brute_force_3d(points):
    assert filter_nondominated(points).ids == [p.id for p in brute_filter(points)]


@settings(max_examples=150, deadline=None)
@given(point_lists())
def test_filter_idempotent(points):
    once = filter_nondominated(points)
    assert filter_nondominated(once).ids == once.ids


@settings(max_examples=100, deadline=None)
@given(point_lists(max_size=40), point_lists(max_size=10))
def test_insert_keeps_stable_set(base, extra):
    s = filter_nondominated(base)
    for z in extra:
        if is_dominated(s, z):
            continue
        s = insert_and_filter(s, z)
        fx = s.fx
        for i in range(len(s)):
            for j in range(len(s)):
                if i != j:
                    assert not dominates(fx[i], fx[j])
                    assert not np.array_equal(fx[i], fx[j])

import random

import pytest
from hypothesis import given, settings, strategies as st

from abductive_ecg.stp import INF, InconsistentNetwork, Interval, STPNetwork

from oracles import brute_minimal, random_network


def net_with(n, cons, origin=False):
    net = STPNetwork(with_origin=origin)
    for _ in range(n):
        net.add_variable()
    for (i, j), (a, b) in cons.items():
        net.set_constraint(i, j, Interval(a, b))
    return net


NRR = Interval(475, 1333)


class TestInterval:
    def test_rejects_inverted(self):
        with pytest.raises(ValueError):
            Interval(5, 4)

    def test_intersect_and_empty(self):
        assert Interval(475, 1333).intersect(Interval(400, 1200)) == Interval(475, 1200)
        assert Interval(0, 1).intersect(Interval(2, 3)) is None

    def test_reverse_shift(self):
        assert Interval(-150, 150).reverse() == Interval(-150, 150)
        assert Interval(1, INF).reverse() == Interval(-INF, -1)
        assert Interval(10, 20).shift(-10) == Interval(0, 10)

    def test_integral_floats_become_ints(self):
        iv = Interval(1.0, 2.0)
        assert isinstance(iv.lower, int) and isinstance(iv.upper, int)


class TestAddVariable:
    def test_fresh_ids(self):
        net = STPNetwork(with_origin=False)
        assert net.add_variable() == 0
        assert net.add_variable() == 1

    def test_unconstrained_default(self):
        net = net_with(2, {})
        c = net.constraint(0, 1)
        assert c.lower == -INF and c.upper == INF

    def test_vacuous_consistency(self):
        assert net_with(3, {}).is_consistent()

    def test_add_after_query_keeps_distances(self):
        net = net_with(2, {(0, 1): (5, 10)})
        assert net.minimal_interval(0, 1) == Interval(5, 10)
        v = net.add_variable()
        net.set_constraint(1, v, Interval(1, 2))
        assert net.minimal_interval(0, v) == Interval(6, 12)


class TestSetConstraint:
    def test_intersection(self):
        net = net_with(3, {})
        net.set_constraint(1, 2, NRR)
        net.set_constraint(1, 2, Interval(400, 1200))
        assert net.constraint(1, 2) == Interval(475, 1200)

    def test_opposite_orders_infeasible(self):
        net = net_with(3, {})
        net.set_constraint(1, 2, Interval(500, 600))
        assert net.set_constraint(2, 1, Interval(100, 200)) is False
        assert not net.feasible
        assert not net.is_consistent()

    def test_idempotent(self):
        net = net_with(3, {})
        net.set_constraint(1, 2, Interval(0, 0))
        net.set_constraint(1, 2, Interval(0, 0))
        assert net.constraint(1, 2) == Interval(0, 0)

    def test_one_orientation_stored(self):
        net = net_with(2, {})
        net.set_constraint(1, 0, Interval(3, 4))
        assert net.constraints() == {(0, 1): Interval(-4, -3)}
        assert net.constraint(1, 0) == Interval(3, 4)

    def test_unknown_variable(self):
        with pytest.raises(IndexError):
            net_with(2, {}).set_constraint(0, 5, Interval(0, 1))

    def test_incremental_cycle_detected(self):
        net = net_with(3, {(0, 1): (100, 100), (1, 2): (100, 100)})
        assert net.is_consistent()
        assert net.set_constraint(0, 2, Interval(50, 150)) is False


class TestConsistency:
    def test_nrr_chain(self):
        assert net_with(3, {(0, 1): (475, 1333), (1, 2): (475, 1333)}).is_consistent()

    def test_triangle(self):
        net = net_with(3, {(0, 1): (100, 100), (1, 2): (100, 100), (0, 2): (50, 150)})
        assert not net.is_consistent()

    def test_empty(self):
        assert STPNetwork(with_origin=False).is_consistent()


class TestMinimalInterval:
    def test_chain(self):
        net = net_with(3, {(0, 1): (475, 1333), (1, 2): (475, 1333)})
        assert net.minimal_interval(0, 2) == Interval(950, 2666)

    def test_single(self):
        assert net_with(2, {(0, 1): (-150, 150)}).minimal_interval(0, 1) == Interval(-150, 150)

    def test_zero_shift(self):
        net = net_with(3, {(0, 1): (1000, 2000), (1, 2): (0, 0)})
        assert net.minimal_interval(0, 2) == Interval(1000, 2000)

    def test_inconsistent_raises(self):
        net = net_with(2, {})
        net.set_constraint(0, 1, Interval(1, 2))
        net.set_constraint(0, 1, Interval(3, 4))
        with pytest.raises(InconsistentNetwork):
            net.minimal_interval(0, 1)

    def test_project(self):
        net = net_with(3, {(0, 1): (10, 20), (1, 2): (5, 5)})
        sub = net.project([0, 2])
        assert sub.n == 2
        assert sub.minimal_interval(0, 1) == Interval(15, 25)


class TestCheckSolution:
    chain = {(0, 1): (475, 1333), (1, 2): (475, 1333)}

    def test_valid(self):
        assert net_with(3, self.chain).check_solution({0: 0, 1: 800, 2: 1600})

    def test_invalid(self):
        assert not net_with(3, self.chain).check_solution({0: 0, 1: 800, 2: 2400})

    def test_empty_net(self):
        assert net_with(3, {}).check_solution({})

    def test_missing_variable(self):
        with pytest.raises(KeyError):
            net_with(3, self.chain).check_solution({0: 0, 1: 800})


# -- properties ------------------------------------------------------------------------

bound = st.integers(-50, 50)


@st.composite
def networks(draw, max_vars=5):
    n = draw(st.integers(2, max_vars))
    cons = {}
    for i in range(n):
        for j in range(i + 1, n):
            if draw(st.booleans()):
                a = draw(bound)
                b = draw(st.integers(a, min(50, a + 15)))
                cons[(i, j)] = (a, b)
    return n, cons


@settings(max_examples=150, deadline=None)
@given(networks())
def test_matches_enumeration(case):
    n, cons = case
    net = net_with(n, cons)
    ok, mins = brute_minimal(n, cons)
    assert net.is_consistent() == ok
    if ok:
        for (i, j), expected in mins.items():
            iv = net.minimal_interval(i, j)
            if expected is None:
                assert (iv.lower, iv.upper) == (-INF, INF)
            else:
                lo, hi, seen = expected
                assert (iv.lower, iv.upper) == (lo, hi)
                assert seen == set(range(lo, hi + 1))


@settings(max_examples=150, deadline=None)
@given(networks(), st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), bound,
                                      st.integers(0, 30)), max_size=6))
def test_set_constraint_never_widens(case, updates):
    n, cons = case
    net = net_with(n, cons)
    for i, j, a, w in updates:
        i, j = i % n, j % n
        if i == j:
            continue
        before = net.constraint(i, j)
        net.set_constraint(i, j, Interval(a, a + w))
        if not net.feasible:
            break
        after = net.constraint(i, j)
        assert before.lower <= after.lower and after.upper <= before.upper


@settings(max_examples=150, deadline=None)
@given(networks())
def test_minimal_interval_symmetry(case):
    n, cons = case
    net = net_with(n, cons)
    if not net.is_consistent():
        return
    for i in range(n):
        for j in range(n):
            assert net.minimal_interval(i, j) == net.minimal_interval(j, i).reverse()


@settings(max_examples=100, deadline=None)
@given(networks(), st.integers(0, 2**32))
def test_incremental_equals_batch(case, seed):
    """Tightening after a query gives the same answer as solving from scratch."""
    n, cons = case
    items = sorted(cons.items())
    random.Random(seed).shuffle(items)
    inc = net_with(n, {})
    inc.is_consistent()
    for (i, j), (a, b) in items:
        inc.set_constraint(i, j, Interval(a, b))
    batch = net_with(n, cons)
    assert inc.is_consistent() == batch.is_consistent()
    if batch.is_consistent():
        for i in range(n):
            for j in range(n):
                assert inc.minimal_interval(i, j) == batch.minimal_interval(i, j)


def test_large_times_fit():
    day = 24 * 3600 * 1000
    net = net_with(2, {(0, 1): (day, day + 1)})
    assert net.minimal_interval(0, 1) == Interval(day, day + 1)
    assert net.check_solution({0: 0, 1: day})


def test_random_networks_seeded():
    rng = random.Random(1)
    for _ in range(100):
        n, cons = random_network(rng, max_vars=5)
        ok, _ = brute_minimal(n, cons)
        assert net_with(n, cons).is_consistent() == ok

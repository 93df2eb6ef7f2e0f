"""The exhaustive oracle itself: exact influence, exact Q/f, brute-force searches."""

import numpy as np
import pytest

from neighborseed.diffusion import monte_carlo_spread
from neighborseed.graph import Graph, preferential_attachment
from neighborseed.oracle import CapacityError, ExactInstance
from neighborseed.rng import spawn
from neighborseed.seeding import (
    Action,
    DiscountAllocation,
    DiscountRateSet,
    LINEAR,
    QUADRATIC_FAST,
)


def linear_profiles(n):
    return {u: LINEAR for u in range(n)}


def random_instance(rng, max_nodes=8, max_edges=12, probs=(0.3, 0.5, 1.0)):
    n = int(rng.integers(3, max_nodes + 1))
    m = int(rng.integers(2, min(max_edges, n * (n - 1)) + 1))
    pairs = set()
    while len(pairs) < m:
        u, v = rng.integers(0, n, size=2)
        if u != v:
            pairs.add((int(u), int(v)))
    pairs = sorted(pairs)
    ps = [float(probs[int(rng.integers(len(probs)))]) for _ in pairs]
    g = Graph(n, [p[0] for p in pairs], [p[1] for p in pairs], ps)
    return ExactInstance(g, linear_profiles(n))


class TestExactInfluence:
    def test_single_edge_closed_form(self):
        g = Graph(2, [0], [1], [0.5])
        inst = ExactInstance(g, linear_profiles(2))
        assert abs(inst.exact_influence({0}) - 1.5) < 1e-12

    def test_empty_seeds(self):
        g = Graph(2, [0], [1], [0.5])
        inst = ExactInstance(g, linear_profiles(2))
        assert inst.exact_influence(set()) == 0.0

    def test_diamond_closed_form(self):
        # 0 -> {1,2} -> 3, all p = 0.5.  P(3 influenced) = 1 - (1 - 0.25)^2.
        g = Graph(4, [0, 0, 1, 2], [1, 2, 3, 3], [0.5] * 4)
        inst = ExactInstance(g, linear_profiles(4))
        expected = 1.0 + 0.5 + 0.5 + (1.0 - 0.75**2)
        assert abs(inst.exact_influence({0}) - expected) < 1e-12
        assert abs(expected - 2.4375) < 1e-15

    def test_matches_monte_carlo_keystone(self):
        rng = spawn(20, "keystone")
        for _ in range(8):
            inst = random_instance(rng)
            n = inst.graph.node_count
            seeds = {int(u) for u in rng.choice(n, size=min(2, n), replace=False)}
            exact = inst.exact_influence(seeds)
            mean, se = monte_carlo_spread(inst.graph, seeds, 40_000, rng)
            assert abs(mean - exact) <= 3 * se + 1e-9

    def test_capacity_error(self):
        g = preferential_attachment(30, 2, spawn(21, "big"))
        with pytest.raises(CapacityError):
            ExactInstance(g, linear_profiles(30))


class TestExactQ:
    def test_zeros(self):
        g = Graph(2, [0], [1], [0.5])
        inst = ExactInstance(g, linear_profiles(2))
        assert inst.exact_q(DiscountAllocation({0: 0.0, 1: 0.0}, 1.0)) == 0.0

    def test_single_certain_user(self):
        g = Graph(2, [0], [1], [0.5])
        inst = ExactInstance(g, linear_profiles(2))
        alloc = DiscountAllocation({0: 1.0}, 1.0)
        assert abs(inst.exact_q(alloc) - inst.exact_influence({0})) < 1e-12

    def test_two_isolated_half(self):
        g = Graph(2, [], [], [])
        inst = ExactInstance(g, linear_profiles(2))
        alloc = DiscountAllocation({0: 0.5, 1: 0.5}, 1.0)
        assert abs(inst.exact_q(alloc) - 1.0) < 1e-12

    def test_matches_literal_subset_sum(self):
        rng = spawn(22, "qcross")
        for _ in range(10):
            inst = random_instance(rng, max_nodes=6, max_edges=8)
            n = inst.graph.node_count
            k = int(rng.integers(1, min(n, 5) + 1))
            users = sorted(int(u) for u in rng.choice(n, size=k, replace=False))
            alloc = DiscountAllocation({u: float(rng.random()) for u in users}, float(k))
            a = inst.exact_q(alloc)
            b = inst.exact_q_subset_sum(alloc)
            assert abs(a - b) < 1e-9


class TestExactF:
    def test_zero_stage1(self):
        g = Graph(3, [0, 1], [1, 2], [1.0, 1.0])
        inst = ExactInstance(g, linear_profiles(3))
        c1 = DiscountAllocation({0: 0.0}, 1.0)
        assert inst.exact_f(c1, {0}, b2=1.0) == 0.0

    def test_single_agent_certain(self):
        # X = {0}; 0 -> 1 (isolated neighbor).  c1 = 1 so S = {0} surely;
        # stage-2 grid gives c_1 = 1 -> Q = 1.
        g = Graph(2, [0], [1], [1.0])
        inst = ExactInstance(g, linear_profiles(2))
        c1 = DiscountAllocation({0: 1.0}, 1.0)
        assert abs(inst.exact_f(c1, {0}, b2=1.0) - 1.0) < 1e-12

    def test_half_agent_scales(self):
        g = Graph(2, [0], [1], [1.0])
        inst = ExactInstance(g, linear_profiles(2))
        c1 = DiscountAllocation({0: 0.5}, 1.0)
        assert abs(inst.exact_f(c1, {0}, b2=1.0) - 0.5) < 1e-12

    def test_two_agent_hand_expansion(self):
        # X = {0, 1}; 0 -> 2, 1 -> 3; all edges sure; linear curves.
        # stage-2 budget 1 concentrates on one reached neighbor -> Q = 1
        # unless both agents join (two neighbors, budget 1 still yields 1).
        # f = P(S nonempty) * 1.
        g = Graph(4, [0, 1], [2, 3], [1.0, 1.0])
        inst = ExactInstance(g, linear_profiles(4))
        c1 = DiscountAllocation({0: 0.5, 1: 0.5}, 1.0)
        p_nonempty = 1.0 - 0.25
        assert abs(inst.exact_f(c1, {0, 1}, b2=1.0) - p_nonempty) < 1e-12


class TestBruteForceSearches:
    def test_best_seeds_star(self):
        src = [0, 0, 0]
        dst = [1, 2, 3]
        g = Graph(4, src, dst, [1.0] * 3)
        inst = ExactInstance(g, linear_profiles(4))
        seeds, val = inst.best_seeds(1)
        assert seeds == {0} and abs(val - 4.0) < 1e-12

    def test_best_seeds_zero(self):
        g = Graph(2, [0], [1], [1.0])
        inst = ExactInstance(g, linear_profiles(2))
        assert inst.best_seeds(0) == (set(), 0.0)

    def test_best_alloc_symmetric_concave(self):
        g = Graph(2, [], [], [])
        inst = ExactInstance(g, {0: QUADRATIC_FAST, 1: QUADRATIC_FAST})
        alloc, val = inst.best_alloc({0, 1}, budget=1.0, grid=20)
        assert abs(alloc.get(0) - 0.5) < 1e-12 and abs(alloc.get(1) - 0.5) < 1e-12
        assert abs(val - 1.5) < 1e-12

    def test_best_alloc_zero_budget(self):
        g = Graph(2, [], [], [])
        inst = ExactInstance(g, linear_profiles(2))
        alloc, val = inst.best_alloc({0, 1}, budget=0.0)
        assert val == 0.0 and alloc.total() == 0.0

    def test_best_alloc_single_user(self):
        g = Graph(1, [], [], [])
        inst = ExactInstance(g, linear_profiles(1))
        alloc, val = inst.best_alloc({0}, budget=2.0)
        assert alloc.get(0) == 1.0 and abs(val - 1.0) < 1e-12

    def test_best_action_set_budgeted(self):
        g = Graph(4, [], [], [])
        inst = ExactInstance(g, linear_profiles(4))
        rates = DiscountRateSet((0.5, 1.0))
        actions, val = inst.best_action_set(range(4), rates, budget=2.0)
        # four isolated linear users, budget 2: four 0.5s give 2.0 expected seeds
        assert abs(val - 2.0) < 1e-12
        assert sum(a.discount for a in actions) <= 2.0 + 1e-9

    def test_action_q_rejects_duplicate_user(self):
        g = Graph(2, [], [], [])
        inst = ExactInstance(g, linear_profiles(2))
        with pytest.raises(ValueError):
            inst.exact_action_q((Action(0, 0.5), Action(0, 1.0)))

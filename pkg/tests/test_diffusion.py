"""Independent-cascade simulation against closed forms and reachability oracles."""

import numpy as np
import pytest

from neighborseed.diffusion import (
    monte_carlo_spread,
    propagate,
    sample_realization,
    spread_under_allocation,
)
from neighborseed.graph import Graph, preferential_attachment
from neighborseed.rng import spawn
from neighborseed.seeding import DiscountAllocation, LINEAR


def chain(n, p=1.0):
    return Graph(n, list(range(n - 1)), list(range(1, n)), [p] * (n - 1))


class TestSampleRealization:
    def test_deterministic_edges(self):
        g = Graph(3, [0, 1], [1, 2], [1.0, 0.0])
        real = sample_realization(g, spawn(0, "r"))
        assert real.live[0] and not real.live[1]

    def test_live_fraction_binomial(self):
        g = Graph(2, [0], [1], [0.3])
        rng = spawn(1, "r")
        runs = 100_000
        live = sum(int(sample_realization(g, rng).live[0]) for _ in range(runs))
        assert abs(live / runs - 0.3) < 0.01


class TestPropagate:
    def test_empty_seeds(self):
        g = chain(3)
        real = sample_realization(g, spawn(2, "r"))
        assert propagate(g, [], real).count == 0

    def test_full_chain(self):
        g = chain(3)
        real = sample_realization(g, spawn(3, "r"))
        res = propagate(g, [0], real)
        assert res.influenced == frozenset({0, 1, 2}) and res.count == 3

    def test_matches_transitive_closure_oracle(self):
        rng = spawn(4, "prop")
        for _ in range(20):
            g = preferential_attachment(20, 2, rng)
            real = sample_realization(g, rng)
            seeds = {int(u) for u in rng.choice(20, size=3, replace=False)}
            res = propagate(g, seeds, real)
            # oracle: fixed-point closure over live edges
            live_edges = [(s, d) for e, (s, d, _) in enumerate(g.edges()) if real.live[e]]
            reach = set(seeds)
            changed = True
            while changed:
                changed = False
                for s, d in live_edges:
                    if s in reach and d not in reach:
                        reach.add(d)
                        changed = True
            assert res.influenced == frozenset(reach)

    def test_monotone_in_seeds(self):
        rng = spawn(5, "mono")
        for _ in range(20):
            g = preferential_attachment(40, 2, rng)
            real = sample_realization(g, rng)
            small = {int(u) for u in rng.choice(40, size=3, replace=False)}
            extra = {int(u) for u in rng.choice(40, size=4, replace=False)}
            a = propagate(g, small, real).influenced
            b = propagate(g, small | extra, real).influenced
            assert a <= b

    def test_monotone_in_live_edges(self):
        rng = spawn(6, "mono2")
        from neighborseed.diffusion import DiffusionRealization
        for _ in range(20):
            g = preferential_attachment(40, 2, rng)
            base = sample_realization(g, rng)
            more = base.live | (rng.random(g.edge_count) < 0.3)
            seeds = {int(u) for u in rng.choice(40, size=2, replace=False)}
            a = propagate(g, seeds, base).influenced
            b = propagate(g, seeds, DiffusionRealization(more)).influenced
            assert a <= b


class TestMonteCarloSpread:
    def test_isolated_node_exact(self):
        g = Graph(1, [], [], [])
        mean, se = monte_carlo_spread(g, [0], 500, spawn(7, "mc"))
        assert mean == 1.0 and se == 0.0

    def test_sure_edge_exact(self):
        g = Graph(2, [0], [1], [1.0])
        mean, se = monte_carlo_spread(g, [0], 500, spawn(8, "mc"))
        assert mean == 2.0 and se == 0.0

    def test_half_edge_closed_form(self):
        g = Graph(2, [0], [1], [0.5])
        mean, se = monte_carlo_spread(g, [0], 100_000, spawn(9, "mc"))
        assert abs(mean - 1.5) < 0.01
        assert abs(se - np.sqrt(0.25 / 100_000)) < 1e-3

    def test_same_seed_same_workers_identical(self):
        g = preferential_attachment(100, 2, spawn(10, "g"))
        a = monte_carlo_spread(g, [0, 3], 2000, spawn(11, "mc"), workers=2)
        b = monte_carlo_spread(g, [0, 3], 2000, spawn(11, "mc"), workers=2)
        assert a == b

    def test_runs_validated(self):
        g = chain(2)
        with pytest.raises(ValueError):
            monte_carlo_spread(g, [0], 0, spawn(0, "x"))


class TestSpreadUnderAllocation:
    def test_two_isolated_half(self):
        g = Graph(2, [], [], [])
        profiles = {0: LINEAR, 1: LINEAR}
        alloc = DiscountAllocation({0: 0.5, 1: 0.5}, budget=1.0)
        mean, _ = spread_under_allocation(g, alloc, profiles, 100_000, spawn(12, "mc"))
        assert abs(mean - 1.0) < 0.01

    def test_zeros_exact(self):
        g = Graph(2, [], [], [])
        profiles = {0: LINEAR, 1: LINEAR}
        alloc = DiscountAllocation({0: 0.0, 1: 0.0}, budget=1.0)
        mean, se = spread_under_allocation(g, alloc, profiles, 200, spawn(13, "mc"))
        assert mean == 0.0 and se == 0.0

    def test_all_ones_exact(self):
        n = 5
        g = Graph(n, [], [], [])
        profiles = {u: LINEAR for u in range(n)}
        alloc = DiscountAllocation({u: 1.0 for u in range(n)}, budget=float(n))
        mean, se = spread_under_allocation(g, alloc, profiles, 200, spawn(14, "mc"))
        assert mean == float(n) and se == 0.0

"""Exhaustive ground truth on tiny instances.

Everything here enumerates all 2^|E| edge-state realizations with their
exact probabilities, so values are exact up to float rounding.  These
functions back the test suite and never feed the shipped optimizers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .seeding import Action, DiscountAllocation, DiscountRateSet, ProfileMap

MAX_ORACLE_EDGES = 20
MAX_ORACLE_NODES = 16


class CapacityError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass
class ExactInstance:
    """A tiny graph plus profiles, with cached realization tables."""

    graph: Graph
    profiles: ProfileMap

    def __post_init__(self):
        g = self.graph
        if g.edge_count > MAX_ORACLE_EDGES:
            raise CapacityError(f"{g.edge_count} edges exceeds oracle cap {MAX_ORACLE_EDGES}")
        if g.node_count > MAX_ORACLE_NODES:
            raise CapacityError(f"{g.node_count} nodes exceeds oracle cap {MAX_ORACLE_NODES}")
        self._tables = None
        self._max_q_cache: dict = {}

    # -- realization tables ------------------------------------------------

    def _build_tables(self):
        g = self.graph
        m, n = g.edge_count, g.node_count
        n_real = 1 << m
        bits = (np.arange(n_real, dtype=np.int64)[:, None] >> np.arange(m)) & 1
        weights = np.ones(n_real)
        for e in range(m):
            p = g.edge_prob[e]
            weights *= np.where(bits[:, e] == 1, p, 1.0 - p)
        reach = np.zeros((n_real, n, n), dtype=bool)
        reach[:, np.arange(n), np.arange(n)] = True
        for e in range(m):
            live = bits[:, e] == 1
            reach[live, g.edge_src[e], g.edge_dst[e]] = True
        # transitive closure by repeated boolean squaring
        steps = max(1, int(np.ceil(np.log2(max(n, 2)))))
        for _ in range(steps):
            nxt = np.matmul(reach.astype(np.uint8), reach.astype(np.uint8)) > 0
            if np.array_equal(nxt, reach):
                break
            reach = nxt
        return weights, reach

    @property
    def tables(self):
        if self._tables is None:
            self._tables = self._build_tables()
        return self._tables

    # -- exact quantities ----------------------------------------------------

    def exact_influence(self, seeds) -> float:
        """Expected cascade size of a fixed seed set."""
        seeds = sorted({int(s) for s in seeds})
        self.graph._check_nodes(seeds)
        if not seeds:
            return 0.0
        weights, reach = self.tables
        covered = reach[:, seeds, :].any(axis=1)
        return float(weights @ covered.sum(axis=1))

    def exact_q(self, alloc: DiscountAllocation) -> float:
        """Expected influence of a probabilistic allocation.

        Computed per node: across realizations, a node is influenced unless
        every potential seed that reaches it rejects.  This is the
        subset-sum expectation reorganized by linearity; the literal
        enumeration is kept alongside as a cross-check.
        """
        users = alloc.users()
        if not users:
            return 0.0
        self.graph._check_nodes(users)
        p = np.array([self.profiles[u](alloc.entries[u]) for u in users])
        weights, reach = self.tables
        sub = reach[:, users, :]
        miss = np.prod(1.0 - p[None, :, None] * sub, axis=1)
        return float(weights @ (1.0 - miss).sum(axis=1))

    def exact_q_subset_sum(self, alloc: DiscountAllocation) -> float:
        """Literal expectation: sum over seed subsets of P(subset) * influence."""
        users = alloc.users()
        p = {u: self.profiles[u](alloc.entries[u]) for u in users}
        total = 0.0
        for r in range(len(users) + 1):
            for subset in itertools.combinations(users, r):
                prob = 1.0
                for u in users:
                    prob *= p[u] if u in subset else 1.0 - p[u]
                if prob:
                    total += prob * self.exact_influence(subset)
        return total

    def exact_action_q(self, actions) -> float:
        """exact_q of the allocation induced by a set of (user, discount) actions."""
        assign: dict[int, float] = {}
        for a in actions:
            if a.user in assign:
                raise ValueError(f"user {a.user} holds two actions")
            assign[a.user] = a.discount
        if not assign:
            return 0.0
        return self.exact_q(DiscountAllocation(assign, budget=sum(assign.values()) + 1e-9))

    # -- exhaustive searches ---------------------------------------------------

    def _alloc_grid(self, users, budget: float, grid: int):
        """All grid allocations with sum = min(budget, |users|), caps at 1."""
        users = sorted(users)
        k = len(users)
        eff = min(budget, float(k))
        units = int(round(eff * grid))
        cap = grid

        def rec(i, remaining):
            if i == k - 1:
                if 0 <= remaining <= cap:
                    yield (remaining,)
                return
            hi = min(cap, remaining)
            lo = max(0, remaining - cap * (k - 1 - i))
            for c in range(lo, hi + 1):
                for rest in rec(i + 1, remaining - c):
                    yield (c,) + rest

        for combo in rec(0, units):
            yield DiscountAllocation({u: c / grid for u, c in zip(users, combo)}, budget=eff + 1e-9)

    def max_q(self, users, budget: float, grid: int = 20) -> float:
        """Best exact_q over the grid simplex on ``users``."""
        users = tuple(sorted(int(u) for u in users))
        key = (users, round(float(budget), 12), grid)
        if key in self._max_q_cache:
            return self._max_q_cache[key]
        if not users or budget <= 0:
            val = 0.0
        elif budget >= len(users):
            val = self.exact_q(DiscountAllocation({u: 1.0 for u in users}, budget=float(len(users))))
        else:
            val = max(self.exact_q(a) for a in self._alloc_grid(users, budget, grid))
        self._max_q_cache[key] = val
        return val

    def exact_f(self, c1: DiscountAllocation, x, b2: float, grid: int = 20,
                stage2_users=None) -> float:
        """Expected two-stage value of a stage-1 allocation.

        Sums over agent subsets S of X; the inner stage-2 maximum runs on a
        discount grid over S's neighborhood outside X (or a caller-supplied
        candidate rule).
        """
        from .graph import neighborhood

        x = sorted({int(u) for u in x})
        if stage2_users is None:
            def stage2_users(s):
                return sorted(neighborhood(self.graph, s) - set(x))
        p = {u: self.profiles[u](c1.get(u)) for u in x}
        total = 0.0
        for r in range(len(x) + 1):
            for subset in itertools.combinations(x, r):
                prob = 1.0
                s = set(subset)
                for u in x:
                    prob *= p[u] if u in s else 1.0 - p[u]
                if prob <= 0.0:
                    continue
                total += prob * self.max_q(stage2_users(s), b2, grid)
        return total

    def best_seeds(self, k: int) -> tuple[set[int], float]:
        """Exhaustive best seed set of size <= k."""
        nodes = range(self.graph.node_count)
        best: tuple[set[int], float] = (set(), 0.0)
        for r in range(min(k, self.graph.node_count) + 1):
            for subset in itertools.combinations(nodes, r):
                val = self.exact_influence(subset)
                if val > best[1] + 1e-12:
                    best = (set(subset), val)
        return best

    def best_alloc(self, users, budget: float, grid: int = 20) -> tuple[DiscountAllocation, float]:
        """Exhaustive best allocation on the grid simplex."""
        users = sorted(int(u) for u in users)
        if not users or budget <= 0:
            return DiscountAllocation.zeros(users, max(budget, 0.0)), 0.0
        best_alloc, best_val = None, -1.0
        for alloc in self._alloc_grid(users, budget, grid):
            val = self.exact_q(alloc)
            if val > best_val + 1e-12:
                best_alloc, best_val = alloc, val
        return best_alloc, best_val

    def best_action_set(self, users, rates: DiscountRateSet, budget: float) -> tuple[tuple[Action, ...], float]:
        """Exhaustive best action set: one action per user, total cost <= budget."""
        users = sorted(int(u) for u in users)
        options = [None] + list(rates)
        best: tuple[tuple[Action, ...], float] = ((), 0.0)
        for combo in itertools.product(options, repeat=len(users)):
            cost = sum(d for d in combo if d is not None)
            if cost > budget + 1e-9:
                continue
            actions = tuple(Action(u, d) for u, d in zip(users, combo) if d is not None)
            val = self.exact_action_q(actions)
            if val > best[1] + 1e-12:
                best = (actions, val)
        return best

"""Independent-cascade simulation and Monte Carlo spread estimation.

This is the ground-truth layer for experiments: optimizers work against the
reverse-reachable estimator, while reported spreads come from the cascades
simulated here.  Runs are split into per-worker streams derived from the
caller's rng; output is bit-identical for a fixed (seed, worker count).
"""

from __future__ import annotations

import math
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import core
from .graph import Graph
from .rng import kernel_seed
from .seeding import DiscountAllocation, ProfileMap, acceptance_probs


def default_workers() -> int:
    return max(1, int(os.environ.get("NEIGHBORSEED_WORKERS", "1")))


@dataclass(frozen=True)
class DiffusionRealization:
    """Live/dead state per edge, aligned with the graph's edge arrays."""

    live: np.ndarray


@dataclass(frozen=True)
class SpreadResult:
    influenced: frozenset[int]
    count: int


def sample_realization(g: Graph, rng: np.random.Generator) -> DiffusionRealization:
    """Flip each edge live independently with its propagation probability."""
    return DiffusionRealization(rng.random(g.edge_count) < g.edge_prob)


def propagate(g: Graph, seeds, real: DiffusionRealization) -> SpreadResult:
    """Nodes reachable from ``seeds`` through live edges (seeds included)."""
    seeds = g._check_nodes(seeds)
    if len(real.live) != g.edge_count:
        raise ValueError("realization does not match graph edge count")
    seen = set(seeds)
    queue = deque(seeds)
    live = real.live
    indptr, dst = g.indptr, g.edge_dst
    while queue:
        u = queue.popleft()
        for e in range(indptr[u], indptr[u + 1]):
            v = int(dst[e])
            if live[e] and v not in seen:
                seen.add(v)
                queue.append(v)
    return SpreadResult(frozenset(seen), len(seen))


def _chunks(runs: int, workers: int) -> list[int]:
    workers = max(1, min(workers, runs)) if runs else 1
    base, extra = divmod(runs, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def _merge_mc(job, runs: int, rng: np.random.Generator, workers: int):
    seed, stream0 = kernel_seed(rng)
    sizes = _chunks(runs, workers)
    tasks = [(seed, stream0 + i, sz) for i, sz in enumerate(sizes) if sz > 0]
    if len(tasks) > 1 and core.backend_name() == "compiled":
        with ThreadPoolExecutor(max_workers=len(tasks)) as pool:
            parts = list(pool.map(lambda t: job(t[2], t[0], t[1]), tasks))
    else:
        parts = [job(sz, sd, st) for sd, st, sz in tasks]
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    mean = total / runs
    if runs > 1:
        var = max(0.0, (total_sq - runs * mean * mean) / (runs - 1))
        stderr = math.sqrt(var / runs)
    else:
        stderr = 0.0
    return mean, stderr


def monte_carlo_spread(g: Graph, seeds, runs: int, rng: np.random.Generator,
                       workers: int | None = None) -> tuple[float, float]:
    """Mean cascade size from a fixed seed set, with its standard error."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    seeds = sorted(set(g._check_nodes(seeds)))
    workers = workers or default_workers()

    def job(sz, sd, st):
        return core.mc_spread(g.indptr, g.edge_dst, g.edge_prob, seeds, sz, sd, st)

    return _merge_mc(job, runs, rng, workers)


def spread_under_allocation(g: Graph, alloc: DiscountAllocation, profiles: ProfileMap,
                            runs: int, rng: np.random.Generator,
                            workers: int | None = None) -> tuple[float, float]:
    """Mean cascade size when seeds are drawn from the allocation each run."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    users, probs = acceptance_probs(alloc, profiles)
    g._check_nodes(users)
    workers = workers or default_workers()

    def job(sz, sd, st):
        return core.mc_spread_alloc(g.indptr, g.edge_dst, g.edge_prob, users, probs, sz, sd, st)

    return _merge_mc(job, runs, rng, workers)

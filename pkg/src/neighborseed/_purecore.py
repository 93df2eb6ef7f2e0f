"""Pure-Python simulation kernels (fallback backend).

Mirrors ``neighborseed._fastcore`` exactly: same PCG32 streams, same
edge-visit order, same skip rule (an edge into an already-influenced node
consumes no randomness).  Either backend can therefore verify the other
bit for bit.  This one is roughly three orders of magnitude slower and is
meant for environments without a compiler and for cross-checking.
"""

from __future__ import annotations

import numpy as np

from .rng import Pcg32


def mc_spread(indptr, targets, probs, seeds, runs, seed, stream):
    """Sum and sum-of-squares of cascade sizes over independent runs."""
    n = len(indptr) - 1
    indptr = [int(x) for x in indptr]
    targets = [int(x) for x in targets]
    probs = [float(x) for x in probs]
    seeds = [int(s) for s in seeds]
    rng = Pcg32(seed, stream)
    stamp = [0] * n
    queue = [0] * n
    total = 0.0
    total_sq = 0.0
    for run in range(1, runs + 1):
        tail = _cascade(indptr, targets, probs, seeds, rng, stamp, queue, run)
        total += tail
        total_sq += tail * tail
    return total, total_sq


def mc_spread_alloc(indptr, targets, probs, users, accept, runs, seed, stream):
    """Like mc_spread, but each run first samples the seed set.

    One acceptance coin is flipped per user per run (in array order) before
    any cascade randomness, keeping the stream layout backend-independent.
    """
    n = len(indptr) - 1
    indptr = [int(x) for x in indptr]
    targets = [int(x) for x in targets]
    probs = [float(x) for x in probs]
    users = [int(u) for u in users]
    accept = [float(a) for a in accept]
    rng = Pcg32(seed, stream)
    stamp = [0] * n
    queue = [0] * n
    total = 0.0
    total_sq = 0.0
    for run in range(1, runs + 1):
        seeds = [u for u, a in zip(users, accept) if rng.next_double() < a]
        tail = _cascade(indptr, targets, probs, seeds, rng, stamp, queue, run)
        total += tail
        total_sq += tail * tail
    return total, total_sq


def _cascade(indptr, targets, probs, seeds, rng, stamp, queue, run):
    head = 0
    tail = 0
    for s in seeds:
        if stamp[s] != run:
            stamp[s] = run
            queue[tail] = s
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        for e in range(indptr[u], indptr[u + 1]):
            v = targets[e]
            if stamp[v] != run and rng.next_double() < probs[e]:
                stamp[v] = run
                queue[tail] = v
                tail += 1
    return tail


def rr_generate(tindptr, tsources, tprobs, theta, n, seed, stream):
    """Sample ``theta`` reverse-reachable sets on the transpose graph.

    Each set starts from a uniform random root and walks incoming edges,
    keeping each with its propagation probability.  Members are emitted in
    visit order; callers sort them.
    """
    tindptr = [int(x) for x in tindptr]
    tsources = [int(x) for x in tsources]
    tprobs = [float(x) for x in tprobs]
    rng = Pcg32(seed, stream)
    stamp = [0] * n
    queue = [0] * n
    offsets = np.empty(theta + 1, dtype=np.int64)
    offsets[0] = 0
    members: list[int] = []
    for k in range(1, theta + 1):
        root = rng.next_below(n)
        stamp[root] = k
        queue[0] = root
        head, tail = 0, 1
        while head < tail:
            v = queue[head]
            head += 1
            for e in range(tindptr[v], tindptr[v + 1]):
                u = tsources[e]
                if stamp[u] != k and rng.next_double() < tprobs[e]:
                    stamp[u] = k
                    queue[tail] = u
                    tail += 1
        members.extend(queue[:tail])
        offsets[k] = len(members)
    return offsets, np.asarray(members, dtype=np.int32)

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simulation kernels: IC cascades and reverse-reachable sampling.

Bit-for-bit equivalent to ``neighborseed._purecore``; see that module for
the stream-layout contract.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint32_t, uint64_t

cnp.import_array()

cdef uint64_t PCG32_MULT = 0x5851F42D4C957F2DULL


cdef struct Pcg:
    uint64_t state
    uint64_t inc


cdef inline uint32_t pcg_next(Pcg* g) noexcept nogil:
    cdef uint64_t old = g.state
    g.state = old * PCG32_MULT + g.inc
    cdef uint32_t xorshifted = <uint32_t>(((old >> 18) ^ old) >> 27)
    cdef uint32_t rot = <uint32_t>(old >> 59)
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31))


cdef inline void pcg_seed(Pcg* g, uint64_t seed, uint64_t stream) noexcept nogil:
    g.state = 0
    g.inc = (stream << 1) | 1
    pcg_next(g)
    g.state = g.state + seed
    pcg_next(g)


cdef inline double pcg_double(Pcg* g) noexcept nogil:
    return pcg_next(g) * (1.0 / 4294967296.0)


cdef inline uint32_t pcg_below(Pcg* g, uint32_t bound) noexcept nogil:
    cdef uint32_t threshold = <uint32_t>((<uint64_t>1 << 32) % bound)
    cdef uint32_t r
    while True:
        r = pcg_next(g)
        if r >= threshold:
            return r % bound


cdef inline int64_t cascade(const int64_t* indptr, const int32_t* targets,
                            const double* probs, const int32_t* seeds,
                            int64_t n_seeds, Pcg* rng, int64_t* stamp,
                            int32_t* queue, int64_t run) noexcept nogil:
    cdef int64_t head = 0, tail = 0, i, e
    cdef int32_t s, u, v
    for i in range(n_seeds):
        s = seeds[i]
        if stamp[s] != run:
            stamp[s] = run
            queue[tail] = s
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        for e in range(indptr[u], indptr[u + 1]):
            v = targets[e]
            if stamp[v] != run and pcg_double(rng) < probs[e]:
                stamp[v] = run
                queue[tail] = v
                tail += 1
    return tail


def mc_spread(const int64_t[::1] indptr, const int32_t[::1] targets,
              const double[::1] probs, const int32_t[::1] seeds,
              int64_t runs, uint64_t seed, uint64_t stream):
    """Sum and sum-of-squares of cascade sizes over independent runs."""
    cdef int64_t n = indptr.shape[0] - 1
    cdef int64_t n_seeds = seeds.shape[0]
    cdef Pcg rng
    cdef double total = 0.0, total_sq = 0.0
    cdef int64_t run, tail
    stamp_arr = np.zeros(n, dtype=np.int64)
    queue_arr = np.empty(n, dtype=np.int32)
    cdef int64_t[::1] stamp = stamp_arr
    cdef int32_t[::1] queue = queue_arr
    if n == 0:
        return 0.0, 0.0
    with nogil:
        pcg_seed(&rng, seed, stream)
        for run in range(1, runs + 1):
            tail = cascade(&indptr[0], &targets[0] if targets.shape[0] else NULL,
                           &probs[0] if probs.shape[0] else NULL,
                           &seeds[0] if n_seeds else NULL,
                           n_seeds, &rng, &stamp[0], &queue[0], run)
            total += tail
            total_sq += <double>tail * <double>tail
    return total, total_sq


def mc_spread_alloc(const int64_t[::1] indptr, const int32_t[::1] targets,
                    const double[::1] probs, const int32_t[::1] users,
                    const double[::1] accept, int64_t runs,
                    uint64_t seed, uint64_t stream):
    """Like mc_spread, but each run first samples the seed set."""
    cdef int64_t n = indptr.shape[0] - 1
    cdef int64_t n_users = users.shape[0]
    cdef Pcg rng
    cdef double total = 0.0, total_sq = 0.0
    cdef int64_t run, tail, i, n_seeds
    stamp_arr = np.zeros(n, dtype=np.int64)
    queue_arr = np.empty(n, dtype=np.int32)
    seeds_arr = np.empty(max(n_users, 1), dtype=np.int32)
    cdef int64_t[::1] stamp = stamp_arr
    cdef int32_t[::1] queue = queue_arr
    cdef int32_t[::1] seeds = seeds_arr
    if n == 0:
        return 0.0, 0.0
    with nogil:
        pcg_seed(&rng, seed, stream)
        for run in range(1, runs + 1):
            n_seeds = 0
            for i in range(n_users):
                if pcg_double(&rng) < accept[i]:
                    seeds[n_seeds] = users[i]
                    n_seeds += 1
            tail = cascade(&indptr[0], &targets[0] if targets.shape[0] else NULL,
                           &probs[0] if probs.shape[0] else NULL,
                           &seeds[0], n_seeds, &rng, &stamp[0], &queue[0], run)
            total += tail
            total_sq += <double>tail * <double>tail
    return total, total_sq


def rr_generate(const int64_t[::1] tindptr, const int32_t[::1] tsources,
                const double[::1] tprobs, int64_t theta, int64_t n,
                uint64_t seed, uint64_t stream):
    """Sample ``theta`` reverse-reachable sets on the transpose graph."""
    cdef Pcg rng
    cdef int64_t k, head, tail, e, cap, pos
    cdef int32_t root, u, v
    offsets_arr = np.empty(theta + 1, dtype=np.int64)
    stamp_arr = np.zeros(n, dtype=np.int64)
    queue_arr = np.empty(n, dtype=np.int32)
    cdef int64_t[::1] offsets = offsets_arr
    cdef int64_t[::1] stamp = stamp_arr
    cdef int32_t[::1] queue = queue_arr
    cap = max(4 * theta, 1024)
    members_arr = np.empty(cap, dtype=np.int32)
    cdef int32_t[::1] members = members_arr
    offsets[0] = 0
    pos = 0
    pcg_seed(&rng, seed, stream)
    for k in range(1, theta + 1):
        with nogil:
            root = <int32_t>pcg_below(&rng, <uint32_t>n)
            stamp[root] = k
            queue[0] = root
            head = 0
            tail = 1
            while head < tail:
                v = queue[head]
                head += 1
                for e in range(tindptr[v], tindptr[v + 1]):
                    u = tsources[e]
                    if stamp[u] != k and pcg_double(&rng) < tprobs[e]:
                        stamp[u] = k
                        queue[tail] = u
                        tail += 1
        if pos + tail > cap:
            cap = max(2 * cap, pos + tail)
            new_arr = np.empty(cap, dtype=np.int32)
            new_arr[:pos] = members_arr[:pos]
            members_arr = new_arr
            members = members_arr
        with nogil:
            for e in range(tail):
                members[pos + e] = queue[e]
        pos += tail
        offsets[k] = pos
    return offsets_arr, members_arr[:pos].copy()

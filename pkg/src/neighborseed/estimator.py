"""Polling-based influence estimation via reverse-reachable (RR) sets.

``theta`` RR sets are sampled on the transpose graph; the influence of a
seed set is the fraction of RR sets it intersects, scaled by the node
count.  Probabilistic allocations are handled in closed form: a set is
covered with probability one minus the product of per-member rejection
probabilities, which is what the coordinate-descent and greedy optimizers
evaluate.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import core
from .diffusion import default_workers
from .graph import Graph, residual_subgraph
from .rng import kernel_seed
from .seeding import DiscountAllocation, ProfileMap

_CACHE_MAGIC = b"NSRR"
_CACHE_VERSION = 1


def default_theta(n: int) -> int:
    """Desk-scale default RR-set count: max(1e4, 20 n ln n)."""
    if n < 2:
        return 10_000
    return max(10_000, int(20 * n * math.log(n)))


class RRIndex:
    """theta reverse-reachable sets plus a node -> set-ids inverted index.

    ``n`` is the node count of the sampled graph (the residual count for
    residual builds); ``id_space`` bounds the node ids appearing in sets,
    which stay in the parent graph's id space after a residual rebuild.
    """

    def __init__(self, offsets, members, roots, n: int, id_space: int, seed_info=(0, 0)):
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.members = np.asarray(members, dtype=np.int32)
        self.roots = np.asarray(roots, dtype=np.int32)
        self.theta = len(self.offsets) - 1
        self.n = int(n)
        self.id_space = int(id_space)
        self.seed_info = (int(seed_info[0]), int(seed_info[1]))
        self._inverted = None

    @property
    def scale(self) -> float:
        """Influence units per covered set: n / theta."""
        return self.n / self.theta if self.theta else 0.0

    def set_members(self, h: int) -> np.ndarray:
        return self.members[self.offsets[h]:self.offsets[h + 1]]

    def _inverted_index(self):
        if self._inverted is None:
            order = np.argsort(self.members, kind="stable")
            set_ids = np.repeat(np.arange(self.theta, dtype=np.int64), np.diff(self.offsets))
            counts = np.bincount(self.members, minlength=self.id_space) if len(self.members) else np.zeros(self.id_space, dtype=np.int64)
            indptr = np.zeros(self.id_space + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            self._inverted = (indptr, set_ids[order])
        return self._inverted

    def sets_for(self, u: int) -> np.ndarray:
        """Ascending ids of the RR sets containing node ``u``."""
        indptr, sets = self._inverted_index()
        return sets[indptr[u]:indptr[u + 1]]

    def coverage_count(self, seeds) -> int:
        """Number of RR sets intersecting the seed set."""
        slices = [self.sets_for(int(u)) for u in seeds]
        slices = [s for s in slices if len(s)]
        if not slices:
            return 0
        return int(len(np.unique(np.concatenate(slices))))

    # -- binary cache ------------------------------------------------------

    def save(self, path) -> None:
        """Write the index: header, then roots, then length-prefixed sets.

        All integers little-endian; set ids are 32-bit.
        """
        with open(path, "wb") as fh:
            fh.write(_CACHE_MAGIC)
            fh.write(struct.pack("<IQQQQQ", _CACHE_VERSION, self.n, self.theta,
                                 self.id_space, self.seed_info[0], self.seed_info[1]))
            fh.write(self.roots.astype("<i4").tobytes())
            lens = np.diff(self.offsets).astype("<u4")
            for h in range(self.theta):
                fh.write(lens[h:h + 1].tobytes())
                fh.write(self.set_members(h).astype("<i4").tobytes())

    @classmethod
    def load(cls, path) -> "RRIndex":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _CACHE_MAGIC:
                raise ValueError("not an RR index cache (bad magic)")
            version, n, theta, id_space, seed, stream = struct.unpack("<IQQQQQ", fh.read(44))
            if version != _CACHE_VERSION:
                raise ValueError(f"unsupported RR cache version {version}")
            roots = np.frombuffer(fh.read(4 * theta), dtype="<i4").astype(np.int32)
            offsets = np.zeros(theta + 1, dtype=np.int64)
            chunks = []
            for h in range(theta):
                (ln,) = struct.unpack("<I", fh.read(4))
                chunks.append(np.frombuffer(fh.read(4 * ln), dtype="<i4").astype(np.int32))
                offsets[h + 1] = offsets[h] + ln
            members = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int32)
        return cls(offsets, members, roots, n, id_space, (seed, stream))


def _sort_within_sets(offsets, members):
    set_ids = np.repeat(np.arange(len(offsets) - 1, dtype=np.int64), np.diff(offsets))
    order = np.lexsort((members, set_ids))
    return members[order]


def build_rr_index(g: Graph, theta: int, rng: np.random.Generator,
                   workers: int | None = None) -> RRIndex:
    """Sample ``theta`` RR sets of ``g`` (uniform roots, reverse cascades)."""
    if theta < 1:
        raise ValueError("theta must be >= 1")
    workers = workers or default_workers()
    seed, stream0 = kernel_seed(rng)
    if g.node_count == 0:
        offsets = np.zeros(theta + 1, dtype=np.int64)
        return RRIndex(offsets, np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.int32),
                       0, 0, (seed, stream0))
    tindptr, tsources, tprobs = g.transpose_csr()
    workers = max(1, min(workers, theta))
    base, extra = divmod(theta, workers)
    sizes = [base + (1 if i < extra else 0) for i in range(workers)]
    tasks = [(stream0 + i, sz) for i, sz in enumerate(sizes) if sz > 0]

    def job(task):
        st, sz = task
        return core.rr_generate(tindptr, tsources, tprobs, sz, g.node_count, seed, st)

    if len(tasks) > 1 and core.backend_name() == "compiled":
        with ThreadPoolExecutor(max_workers=len(tasks)) as pool:
            parts = list(pool.map(job, tasks))
    else:
        parts = [job(t) for t in tasks]
    offsets = np.zeros(theta + 1, dtype=np.int64)
    member_chunks = []
    pos = 0
    base_off = 0
    for (off, mem), (_, sz) in zip(parts, tasks):
        offsets[pos + 1:pos + sz + 1] = off[1:] + base_off
        member_chunks.append(mem)
        base_off += off[-1]
        pos += sz
    members = np.concatenate(member_chunks) if member_chunks else np.zeros(0, dtype=np.int32)
    roots = members[offsets[:-1]] if len(members) else np.zeros(0, dtype=np.int32)
    members = _sort_within_sets(offsets, members)
    return RRIndex(offsets, members, roots, g.node_count, g.node_count, (seed, stream0))


def rebuild_for_residual(g: Graph, influenced, theta: int, rng: np.random.Generator,
                         workers: int | None = None) -> RRIndex:
    """RR index of the residual graph, reported in the parent id space."""
    sub, parent_ids = residual_subgraph(g, influenced)
    idx = build_rr_index(sub, theta, rng, workers)
    if sub.node_count == 0:
        return RRIndex(idx.offsets, idx.members, idx.roots, 0, g.node_count, idx.seed_info)
    members = parent_ids[idx.members].astype(np.int32)
    roots = parent_ids[idx.roots].astype(np.int32)
    return RRIndex(idx.offsets, members, roots, sub.node_count, g.node_count, idx.seed_info)


def filter_for_residual(idx: RRIndex, influenced) -> RRIndex:
    """Cheap residual approximation: drop sets rooted at influenced nodes.

    Influenced members left inside surviving sets are harmless because
    residual allocations never assign them positive acceptance probability.
    """
    influenced = set(int(u) for u in influenced)
    if not influenced:
        return idx
    keep = np.array([int(r) not in influenced for r in idx.roots], dtype=bool)
    lens = np.diff(idx.offsets)[keep]
    offsets = np.zeros(len(lens) + 1, dtype=np.int64)
    np.cumsum(lens, out=offsets[1:])
    starts = idx.offsets[:-1][keep]
    flat = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens) + np.arange(lens.sum())
    members = idx.members[flat] if len(flat) else np.zeros(0, dtype=np.int32)
    n_resid = idx.n - len(influenced & set(range(idx.id_space)))
    return RRIndex(offsets, members, idx.roots[keep], max(n_resid, 0), idx.id_space, idx.seed_info)


# -- estimation ----------------------------------------------------------


def estimate_influence(idx: RRIndex, seeds) -> float:
    """Covered sets times n / theta."""
    return idx.coverage_count(seeds) * idx.scale


def _one_minus_accept(idx: RRIndex, alloc: DiscountAllocation, profiles: ProfileMap) -> np.ndarray:
    one_minus = np.ones(idx.id_space)
    for u, c in alloc.items():
        one_minus[u] = 1.0 - profiles[u](c)
    return one_minus


def estimate_alloc_influence(idx: RRIndex, alloc: DiscountAllocation, profiles: ProfileMap) -> float:
    """Expected influence of a probabilistic allocation.

    Each RR set is covered with probability one minus the product of its
    members' rejection probabilities; users outside the allocation reject
    surely.
    """
    if idx.theta == 0 or idx.n == 0 or len(idx.members) == 0:
        return 0.0
    one_minus = _one_minus_accept(idx, alloc, profiles)
    prods = np.multiply.reduceat(one_minus[idx.members], idx.offsets[:-1])
    return float(idx.scale * (idx.theta - prods.sum()))


@dataclass(frozen=True)
class PairCoefficients:
    """Bilinear form of the estimated influence in two users' acceptance probs.

    value(pu, pv) = a0 + au*pu + av*pv + auv*pu*pv reproduces the full
    allocation estimate with every other discount held fixed.
    """

    a0: float
    au: float
    av: float
    auv: float

    def value(self, pu, pv):
        return self.a0 + self.au * pu + self.av * pv + self.auv * pu * pv


def pair_coefficients(idx: RRIndex, alloc: DiscountAllocation, profiles: ProfileMap,
                      u: int, v: int) -> PairCoefficients:
    """Decompose the allocation estimate around users ``u`` and ``v``."""
    if u == v:
        raise ValueError("pair users must differ")
    if idx.theta == 0 or idx.n == 0 or len(idx.members) == 0:
        return PairCoefficients(0.0, 0.0, 0.0, 0.0)
    one_minus = _one_minus_accept(idx, alloc, profiles)
    scale = idx.scale
    prods_all = np.multiply.reduceat(one_minus[idx.members], idx.offsets[:-1])
    total_cov = float(idx.theta - prods_all.sum())
    su, sv = idx.sets_for(u), idx.sets_for(v)
    rel = np.union1d(su, sv)
    if len(rel) == 0:
        return PairCoefficients(scale * total_cov, 0.0, 0.0, 0.0)
    uin = np.isin(rel, su, assume_unique=True)
    vin = np.isin(rel, sv, assume_unique=True)
    lens = np.diff(idx.offsets)[rel]
    starts = idx.offsets[:-1][rel]
    flat = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens) + np.arange(lens.sum())
    mem = idx.members[flat]
    vals = np.where((mem == u) | (mem == v), 1.0, one_minus[mem])
    bounds = np.concatenate(([0], np.cumsum(lens)[:-1]))
    r = np.multiply.reduceat(vals, bounds)
    cov_rel_now = float(np.sum(1.0 - prods_all[rel]))
    a0 = scale * ((total_cov - cov_rel_now) + float(np.sum(1.0 - r)))
    au = scale * float(r[uin].sum())
    av = scale * float(r[vin].sum())
    auv = -scale * float(r[uin & vin].sum())
    return PairCoefficients(a0, au, av, auv)


# -- coverage structure restricted to a user subset ------------------------


class UserSetCoverage:
    """Coverage state over the RR sets touching a fixed user subset.

    Only members inside the subset matter (everyone else rejects surely), so
    products run over per-set member lists restricted to the subset.  Serves
    both the coordinate-descent objective and the discrete action-set
    evaluators.
    """

    def __init__(self, idx: RRIndex, users):
        self.idx = idx
        self.users = sorted(int(u) for u in users)
        self.pos = {u: i for i, u in enumerate(self.users)}
        self.scale = idx.scale
        per_user = [idx.sets_for(u) for u in self.users]
        rel = np.unique(np.concatenate(per_user)) if per_user and any(len(s) for s in per_user) else np.zeros(0, dtype=np.int64)
        self.rel = rel
        self.n_rel = len(rel)
        # set-id -> dense relevant index
        self.user_rids = [np.searchsorted(rel, s).astype(np.int64) for s in per_user]
        pair_rid = np.concatenate(self.user_rids) if self.user_rids else np.zeros(0, dtype=np.int64)
        pair_upos = np.concatenate([np.full(len(s), i, dtype=np.int64) for i, s in enumerate(per_user)]) if per_user else np.zeros(0, dtype=np.int64)
        order = np.argsort(pair_rid, kind="stable")
        self.seg_upos = pair_upos[order]
        counts = np.bincount(pair_rid, minlength=self.n_rel) if len(pair_rid) else np.zeros(self.n_rel, dtype=np.int64)
        self.seg_ptr = np.zeros(self.n_rel + 1, dtype=np.int64)
        np.cumsum(counts, out=self.seg_ptr[1:])
        self.q = np.zeros(len(self.users))
        self.prods = np.ones(self.n_rel)

    def reset(self, q_by_user: dict[int, float] | None = None) -> None:
        self.q[:] = 0.0
        if q_by_user:
            for u, qv in q_by_user.items():
                self.q[self.pos[u]] = qv
        if self.n_rel:
            self.prods = np.multiply.reduceat(1.0 - self.q[self.seg_upos], self.seg_ptr[:-1])
        else:
            self.prods = np.ones(0)

    def coverage_sum(self) -> float:
        return float(self.n_rel - self.prods.sum())

    def value(self) -> float:
        return self.scale * self.coverage_sum()

    def exact_value(self) -> float:
        """Exactly rounded value; monotone across gated updates."""
        if not self.n_rel:
            return 0.0
        return self.scale * math.fsum(1.0 - self.prods)

    def set_q(self, u: int, qv: float) -> None:
        i = self.pos[u]
        rids = self.user_rids[i]
        if len(rids):
            old = self.q[i]
            if old != 0.0 or qv != 0.0:
                # recompute affected products from scratch to avoid drift
                self.q[i] = qv
                self._recompute(rids)
                return
        self.q[i] = qv

    def _recompute(self, rids) -> None:
        lens = self.seg_ptr[rids + 1] - self.seg_ptr[rids]
        starts = self.seg_ptr[rids]
        flat = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens) + np.arange(lens.sum())
        vals = 1.0 - self.q[self.seg_upos[flat]]
        bounds = np.concatenate(([0], np.cumsum(lens)[:-1]))
        self.prods[rids] = np.multiply.reduceat(vals, bounds)

    def multiply_in(self, u: int, qv: float) -> None:
        """Fast-path accumulate for greedy adds (u must currently have q=0)."""
        i = self.pos[u]
        self.q[i] = qv
        rids = self.user_rids[i]
        if len(rids):
            self.prods[rids] *= (1.0 - qv)

    def weight(self, u: int) -> float:
        """Sum of residual products over sets containing ``u`` (q[u] must be 0)."""
        rids = self.user_rids[self.pos[u]]
        return float(self.prods[rids].sum()) if len(rids) else 0.0

    def pair_segments(self, u: int, v: int):
        """(rids, r, uin, vin) for the sets containing u or v.

        ``r`` is the per-set product excluding u and v at current discounts.
        """
        iu, iv = self.pos[u], self.pos[v]
        ru, rv = self.user_rids[iu], self.user_rids[iv]
        rids = np.union1d(ru, rv)
        if len(rids) == 0:
            return rids, np.ones(0), np.zeros(0, bool), np.zeros(0, bool)
        uin = np.isin(rids, ru, assume_unique=True)
        vin = np.isin(rids, rv, assume_unique=True)
        lens = self.seg_ptr[rids + 1] - self.seg_ptr[rids]
        starts = self.seg_ptr[rids]
        flat = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens) + np.arange(lens.sum())
        upos = self.seg_upos[flat]
        vals = np.where((upos == iu) | (upos == iv), 1.0, 1.0 - self.q[upos])
        bounds = np.concatenate(([0], np.cumsum(lens)[:-1]))
        r = np.multiply.reduceat(vals, bounds)
        return rids, r, uin, vin

    def apply_pair(self, u: int, qu: float, v: int, qv: float, rids, new_prods) -> None:
        self.q[self.pos[u]] = qu
        self.q[self.pos[v]] = qv
        if len(rids):
            self.prods[rids] = new_prods
